"""Physical constants (SI units) shared across the package."""

Q_E = 1.602177e-19  # elementary charge, C
K_B = 1.380649e-23  # Boltzmann constant, J/K
EPS0 = 8.8541878128e-12  # vacuum permittivity, F/m


def thermal_voltage(temperature: float) -> float:
    """kT/q in volts; 0.0258520 V at 300 K."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return K_B * temperature / Q_E

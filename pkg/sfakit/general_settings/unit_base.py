"""
Unit Base - Object for holding units and the unit registry

Everything inside sfakit works in atomic units; the laboratory units used in
run configs are converted here.
"""
# Third party imports
import pint


class UnitBase:

    """Class to hold the unit registry and the laser-unit conversions

    :param pint.UnitRegistry ur: default unit registry
    :param str field: atomic field unit
    :param str energy: atomic energy unit
    :param str time: atomic time unit

    """
    def __init__(self):
        """Initialize the UnitBase used for converting laboratory inputs"""
        self.ur = pint.UnitRegistry()
        self.field = 'atomic_unit_of_electric_field'
        self.energy = 'hartree'
        self.time = 'atomic_unit_of_time'
        self.length = 'bohr'

    def field_from_intensity(self, intensity_wcm2):
        """Peak field in a.u. of a linearly polarized beam of the given
        cycle-averaged intensity

        :param float intensity_wcm2: Intensity in W/cm^2

        :return: Peak electric field in a.u.
        :rtype: float

        """
        ur = self.ur
        intensity = intensity_wcm2 * ur('W / cm**2')
        e0 = ((2 * intensity / (ur.speed_of_light * ur.vacuum_permittivity)) ** 0.5).to(self.field)
        return float(e0.magnitude)

    def intensity_from_field(self, e0_au):
        """Inverse of :func:`field_from_intensity`

        :param float e0_au: Peak field in a.u.

        :return: Intensity in W/cm^2
        :rtype: float

        """
        ur = self.ur
        field = e0_au * ur(self.field)
        intensity = (0.5 * ur.speed_of_light * ur.vacuum_permittivity * field ** 2).to('W / cm**2')
        return float(intensity.magnitude)

    def omega_from_wavelength(self, wavelength_nm):
        """Photon energy (= angular frequency in a.u.) for a vacuum wavelength

        :param float wavelength_nm: Wavelength in nm

        :return: omega in a.u.
        :rtype: float

        """
        ur = self.ur
        energy = (ur.planck_constant * ur.speed_of_light / (wavelength_nm * ur.nm)).to(self.energy)
        return float(energy.magnitude)

    def wavelength_from_omega(self, omega_au):
        """Inverse of :func:`omega_from_wavelength`"""
        ur = self.ur
        wavelength = (ur.planck_constant * ur.speed_of_light / (omega_au * ur(self.energy))).to('nm')
        return float(wavelength.magnitude)

    def to_ev(self, energy_au):
        """Converts an energy from hartree to eV"""
        return float((energy_au * self.ur(self.energy)).to('eV').magnitude)

    def from_ev(self, energy_ev):
        """Converts an energy from eV to hartree"""
        return float((energy_ev * self.ur('eV')).to(self.energy).magnitude)

    def from_fs(self, time_fs):
        """Converts a time from fs to a.u."""
        return float((time_fs * self.ur('fs')).to(self.time).magnitude)

    def to_fs(self, time_au):
        """Converts a time from a.u. to fs"""
        return float((time_au * self.ur(self.time)).to('fs').magnitude)


units = UnitBase()

"""
General sfakit output column names
"""


class VariableNames(object):

    """Names of the columns written to the result files

    This provides a central location to reduce errors in developing sfakit modules by forcing a naming convention.
    Every writer takes its column names (and unit tags) from here.

    This is not really needed by the user and should only be used by developers.
    """
    def __init__(self):

        # ATI
        self.momentum = 'p_au'
        self.polar_angle = 'theta_rad'
        self.b0_re = 'b0_re'
        self.b0_im = 'b0_im'
        self.b1_re = 'b1_re'
        self.b1_im = 'b1_im'
        self.total_prob = 'total_prob'
        self.energy = 'energy_au'
        self.energy_density = 'dP_dE'

        # HHG
        self.harmonic_order = 'harmonic_order'
        self.intensity = 'intensity'
        self.phase = 'phase'
        self.time = 't_au'
        self.dipole = ['dipole_x', 'dipole_y', 'dipole_z']

        # Orbits
        self.omega_harm = 'omega_harm'

        # NSDI
        self.p1 = 'p1_au'
        self.p2 = 'p2_au'
        self.prob = 'prob'

        # Quench
        self.separation = 'R_au'
        self.ip = 'ip_au'
        self.berry_rate = 'berry_rate'
        self.contribution = 'contribution'

        # Solids
        self.currents = ['Jra_x', 'Jra_y', 'Jer_x', 'Jer_y']
        self.intra = 'intra'
        self.inter = 'inter'
        self.total = 'total'

        # Depletion tables
        self.re_a = 're_a'
        self.im_a = 'im_a'

    @property
    def ati_columns(self):
        """Columns of the ATI momentum table, with and without rescattering"""
        return [self.momentum, self.polar_angle, self.b0_re, self.b0_im,
                self.b1_re, self.b1_im, self.total_prob]

    @property
    def orbit_columns(self):
        return [self.omega_harm, 're_tion', 'im_tion', 're_trec', 'im_trec',
                're_ps_x', 're_ps_y', 're_ps_z', 'im_ps_x', 'im_ps_y', 'im_ps_z', 'im_S', 'label']

    @property
    def units(self):
        """Unit tags written in the '# units' header line"""
        return {
            self.momentum: 'a.u.',
            self.polar_angle: 'rad',
            self.energy: 'a.u.',
            self.time: 'a.u.',
            self.separation: 'a.u.',
            self.ip: 'a.u.',
            self.berry_rate: 'a.u.',
            self.p1: 'a.u.',
            self.p2: 'a.u.',
            self.omega_harm: 'harmonic order',
            self.harmonic_order: 'harmonic order',
        }

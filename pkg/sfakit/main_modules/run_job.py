"""
Batch orchestration of one run: dispatch a validated config to its pipeline,
write the CSV tables, the plot script and the manifest
"""
# Standard library imports
import logging
from pathlib import Path
import time
import warnings

# Third party imports
import attr
import numpy as np
import pandas as pd

# sfakit library imports
from sfakit.calculation_tools.errors import DomainError, OutputError, SFAError
from sfakit.calculation_tools.helper import AttrDict
from sfakit.calculation_tools.parallel import WorkerPool
from sfakit.general_settings.variable_names import VariableNames
from sfakit.input_output.sfakit_io import file_hash, move_to_partial, write_csv, write_json_atomic
from sfakit.main_modules import molecule_dynamics as md
from sfakit.main_modules import orbits, sfa_single, solids_sbe, two_electron
from sfakit.main_modules.depletion import ground_state_amplitude
from sfakit.visuals import plots
from sfakit.visuals.plot_scripts import write_plot_script

logger = logging.getLogger('RunJobLogger')
_var = VariableNames()

MANIFEST = 'manifest.json'
CLASSICAL_CUTOFF = 3.17


class _Outputs:
    """Files written by one run, in write order"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.files = []

    def csv(self, name, frame, units=None):
        path = write_csv(self.out_dir / name, frame, units)
        self.files.append(path)
        logger.info(f'Wrote {path.name} ({len(frame)} rows)')
        return name

    def add(self, path):
        self.files.append(Path(path))
        return Path(path).name


@attr.s(eq=False)
class RunManifest:
    """Record of one run

    :param str kind: The job kind
    :param dict config: Echo of every section the job read
    :param str version: sfakit version
    :param float wall_time: Seconds spent in the run
    :param dict grids: Grid sizes
    :param list warnings: Warnings raised during the run
    :param list files: path, sha256 and bytes of every output
    :param dict summary: Headline numbers of the run
    :param dict failure: type, message and exit_code when the run failed

    """
    kind = attr.ib()
    config = attr.ib(factory=dict)
    version = attr.ib(default='')
    wall_time = attr.ib(default=0.0)
    grids = attr.ib(factory=dict)
    warnings = attr.ib(factory=list)
    files = attr.ib(factory=list)
    summary = attr.ib(factory=dict)
    failure = attr.ib(default=None)
    seed = attr.ib(default=0)
    threads = attr.ib(default=1)

    @property
    def ok(self):
        return self.failure is None

    @property
    def exit_code(self):
        return 0 if self.failure is None else self.failure['exit_code']

    def to_dict(self):
        return attr.asdict(self, recurse=False)


# Pipelines
def _amplitude(config, pulse, target, times, pool, outputs):
    """Ground-state amplitude of the configured strategy; None for unit"""
    strategy = config.depletion.strategy
    if strategy == 'unit':
        return None
    track = ground_state_amplitude(strategy, pulse, target, times, options=config.depletion, pool=pool)
    outputs.csv('amplitude.csv', track.to_frame())
    return track


def _run_ati(config, pool, outputs):
    pulse, target, num = config.build_pulse(), config.build_target(), config.numerics
    times = sfa_single.default_time_grid(pulse, target.ip, p_max=num.p_max_au, points_per_period=num.points_per_period)
    a = _amplitude(config, pulse, target, times, pool, outputs)
    p_values, theta, momenta = sfa_single.polar_momentum_grid(pulse, num.p_max_au, num.n_p, num.n_theta)

    b0 = sfa_single.AmplitudeGrid(momenta, sfa_single.direct_amplitude(
        target, pulse, a, momenta, times=times, mode=num.quadrature, max_phase_per_step=num.max_phase_per_step,
        pool=pool))
    b1 = None
    if num.rescattering:
        grid = None
        if num.intermediate_mode == 'grid':
            n_points = num.intermediate_points if target.dimension == 1 else num.intermediate_points_3d
            grid = sfa_single.intermediate_momentum_grid(target, pulse, n_points=n_points)
        b1 = sfa_single.AmplitudeGrid(momenta, sfa_single.rescattering_amplitude(
            target, pulse, a, momenta, times=times, intermediate_mode=num.intermediate_mode, mode=num.quadrature,
            delta=num.spreading_delta_au, max_phase_per_step=num.max_phase_per_step, pool=pool,
            intermediate_grid=grid), kind='rescattered_b1')
    probability = sfa_single.ati_spectrum(b0, b1)

    p_grid, theta_grid = np.meshgrid(p_values, theta, indexing='ij')
    table = {_var.momentum: p_grid.ravel(), _var.polar_angle: theta_grid.ravel(),
             _var.b0_re: b0.values.real.ravel(), _var.b0_im: b0.values.imag.ravel()}
    if b1 is not None:
        table.update({_var.b1_re: b1.values.real.ravel(), _var.b1_im: b1.values.imag.ravel()})
    table[_var.total_prob] = probability['total'].ravel()
    spectrum = outputs.csv('ati_spectrum.csv', pd.DataFrame(table))

    energy, density = sfa_single.energy_spectrum(probability['total'], p_values, theta)
    outputs.csv('ati_energy.csv', pd.DataFrame({_var.energy: energy, _var.energy_density: density}))

    up = pulse.ponderomotive_energy()
    summary = {'ip_au': target.ip, 'up_au': up, 'rescattering': bool(num.rescattering),
               'final_population': 1.0 if a is None else a.final_population}
    grids = {'n_times': len(times), 'n_p': len(p_values), 'n_theta': len(theta)}
    figure = plots.spectrum_figure(energy / up, {'dP/dE': density}, 'Photoelectron energy spectrum',
                                   x_title='E / Up', y_title='dP/dE (arb. u.)')
    context = dict(files={'spectrum': spectrum}, up=up, rescattering=b1 is not None)
    return grids, summary, context, figure


def _plot_range(pulse, ip, nyquist):
    cutoff = (ip + CLASSICAL_CUTOFF * pulse.ponderomotive_energy()) / pulse.omega
    return cutoff, float(min(nyquist, 1.5 * cutoff + 5))


def _run_hhg(config, pool, outputs):
    pulse, target, num = config.build_pulse(), config.build_target(), config.numerics
    times = sfa_single.default_time_grid(pulse, target.ip, points_per_period=num.points_per_period)
    a = _amplitude(config, pulse, target, times, pool, outputs)
    series = sfa_single.hhg_dipole(target, pulse, a, times, delta=num.spreading_delta_au, pool=pool)
    spectrum = sfa_single.harmonic_spectrum(series, pulse.omega, window=num.window, form=num.form)

    dipole = pd.DataFrame(np.real(series.values), columns=_var.dipole)
    dipole.insert(0, _var.time, series.times)
    outputs.csv('hhg_dipole.csv', dipole)
    name = outputs.csv('hhg_spectrum.csv', pd.DataFrame({_var.harmonic_order: spectrum.order,
                                                         _var.intensity: spectrum.intensity,
                                                         _var.phase: spectrum.phase}))

    cutoff, max_order = _plot_range(pulse, target.ip, spectrum.nyquist_order)
    summary = {'ip_au': target.ip, 'up_au': pulse.ponderomotive_energy(), 'cutoff_order': cutoff,
               'nyquist_order': spectrum.nyquist_order}
    keep = spectrum.order <= max_order
    figure = plots.spectrum_figure(spectrum.order[keep], {'|d(Ω)|²': spectrum.intensity[keep]}, 'Harmonic spectrum')
    context = dict(files={'spectrum': name}, cutoff_order=cutoff, max_order=max_order)
    return {'n_times': len(times)}, summary, context, figure


def _run_orbits(config, pool, outputs):
    pulse, target, num = config.build_pulse(), config.build_target(), config.numerics
    ip, up = target.ip, pulse.ponderomotive_energy()
    low = pulse.omega if num.include_below_threshold else ip
    omegas = np.linspace(low, ip + 3.5 * up, num.n_omega)
    tracks = orbits.continuation(pulse, ip, omegas, pool=pool, seeds_per_half_cycle=num.seeds_per_half_cycle,
                                 tol=num.newton_tolerance, max_iter=num.max_iterations,
                                 dedup_tolerance=num.dedup_tolerance)

    rows = [orbit.as_row(pulse.omega) for track in tracks for orbit in track.orbits if orbit is not None]
    frame = pd.DataFrame(rows, columns=_var.orbit_columns)
    name = outputs.csv('orbits.csv', frame, units={c: 'a.u.' for c in _var.orbit_columns[1:-1]})
    omega_out, intensity, _ = orbits.spa_spectrum(tracks, target, pulse)
    outputs.csv('orbits_spectrum.csv', pd.DataFrame({_var.omega_harm: omega_out / pulse.omega,
                                                     _var.intensity: intensity}))

    ratio, birth, ret = orbits.classical_return_scan(pulse)
    summary = {'ip_au': ip, 'up_au': up, 'families': [track.label for track in tracks],
               'lost_at': [track.lost_at for track in tracks if track.lost_at is not None],
               'classical_max_over_up': ratio, 'classical_birth_phase_rad': birth,
               'classical_return_phase_rad': ret}
    context = dict(files={'orbits': name}, period=pulse.period)
    figure = plots.orbits_figure(frame, 'Quantum orbits')
    return {'n_omega': len(omegas), 'n_orbits': len(rows)}, summary, context, figure


def _run_nsdi(config, pool, outputs):
    pulse, model, num = config.build_pulse(), config.build_two_electron_model(), config.numerics
    a = None
    if config.depletion.strategy != 'unit':
        times = sfa_single.default_time_grid(pulse, model.first_ip, points_per_period=num.points_per_period)
        a = _amplitude(config, pulse, AttrDict(ip=model.first_ip), times, pool, outputs)
    parallel = np.linspace(-num.p_max_au, num.p_max_au, num.n_p)
    amplitudes = two_electron.nsdi_amplitudes(model, pulse, parallel, mechanism=num.mechanism,
                                              hermite_points=num.hermite_points, a=a, pool=pool)
    cmap = two_electron.correlation_map(amplitudes, channel_sum=num.channel_sum, symmetrization=num.symmetrization)
    frame = cmap.to_frame()
    name = outputs.csv('nsdi_map.csv', frame)

    summary = {'mechanism': num.mechanism, 'channels': cmap.channels, 'quadrants': cmap.quadrant_masses(),
               'nodes_without_saddles': amplitudes.flags}
    grids = {'n_parallel': len(parallel), 'n_transverse': len(amplitudes.transverse)}
    context = dict(files={'map': name}, up=pulse.ponderomotive_energy())
    return grids, summary, context, plots.map_figure(frame, 'Correlated momentum map')


def _nuclear_times(pulse, dt):
    n = max(int(np.ceil(pulse.duration / dt)), 1)
    return np.linspace(0.0, pulse.duration, n + 1)


def _run_quench(config, pool, outputs):
    pulse, num, mol = config.build_pulse(), config.numerics, config.molecule
    state = config.build_nuclei()
    target = config.build_target().with_separation(state.separation)

    t_nuclei = _nuclear_times(pulse, mol.dt_au)
    electronic = md.double_delta_energy(target) if mol.include_electronic_force else None
    trajectory = md.coulomb_explosion(state, t_nuclei, electronic=electronic, delta_r=mol.delta_r_au)
    times = sfa_single.default_time_grid(pulse, target.ip, points_per_period=num.points_per_period)
    track = md.quench_track(target, times, np.interp(times, t_nuclei, trajectory.separation))
    track_name = outputs.csv('quench_track.csv', track.to_frame())

    a = _amplitude(config, pulse, target, times, pool, outputs)
    if mol.wavepacket_width_au > 0:
        a = md.overlap_amplitude(a, md.quench_overlaps(state, mol.wavepacket_width_au, times), times)
    result = md.quenched_hhg(track, pulse, a, times, delta=num.spreading_delta_au, pool=pool)
    spectra = result.spectra(pulse.omega, window=num.window, form=num.form)
    frames = [pd.DataFrame({_var.harmonic_order: s.order, _var.intensity: s.intensity, _var.phase: s.phase,
                            _var.contribution: tag}) for tag, s in spectra.items()]
    spectrum = outputs.csv('hhg_spectrum.csv', pd.concat(frames, ignore_index=True))

    ip_ratio = float(track.ip[-1] / track.ip[0])
    cutoff, max_order = _plot_range(pulse, target.ip, spectra['total'].nyquist_order)
    summary = {'initial_separation_au': state.separation, 'final_separation_au': float(track.separation[-1]),
               'ip_ratio': ip_ratio, 'energy_drift': trajectory.energy_drift,
               'final_overlap_population': 1.0 if a is None else float(abs(a(times[-1])) ** 2)}
    keep = spectra['total'].order <= max_order
    curves = {tag: s.intensity[keep] for tag, s in spectra.items()}
    figure = plots.spectrum_figure(spectra['total'].order[keep], curves, 'Quenched-molecule harmonics')
    context = dict(files={'track': track_name, 'spectrum': spectrum, 'amplitude': None}, max_order=max_order)
    return {'n_times': len(times), 'n_nuclear_steps': len(t_nuclei) - 1}, summary, context, figure


def _run_selfconsistent(config, pool, outputs):
    pulse, mol = config.build_pulse(), config.molecule
    state = config.build_nuclei()
    target = config.build_target().with_separation(state.separation)
    times = _nuclear_times(pulse, mol.dt_au)
    dep = config.depletion
    mode = 'full' if dep.strategy == 'sfa_full' else 'markov'
    result = md.selfconsistent_loop(target, pulse, state, times, mode=mode, epsilon=dep.kernel_epsilon_au,
                                    conjugate_first_dipole=dep.conjugate_first_dipole, delta_r=mol.delta_r_au)
    track_name = outputs.csv('quench_track.csv', result.track.to_frame())
    amplitude = outputs.csv('amplitude.csv', result.amplitude.to_frame())

    summary = {'final_population': result.amplitude.final_population,
               'final_separation_au': float(result.track.separation[-1]),
               'ip_ratio': float(result.track.ip[-1] / result.track.ip[0])}
    figure = plots.spectrum_figure(times, {'|a(t)|²': result.amplitude.population}, 'Ground-state population',
                                   x_title='t (a.u.)', y_title='|a(t)|²', log_y=False)
    context = dict(files={'track': track_name, 'spectrum': None, 'amplitude': amplitude}, max_order=0)
    return {'n_times': len(times)}, summary, context, figure


def _run_solid(config, pool, outputs):
    pulse, model, num = config.build_pulse(), config.build_band_model(), config.numerics
    trajectory = solids_sbe.integrate_sbe(model, pulse, num.n_k, num.dt_au, berry_sign=num.berry_sign, pool=pool)
    intra = solids_sbe.intraband_current(model, trajectory)
    inter = solids_sbe.interband_current(model, trajectory, derivative=num.current_derivative)
    times = trajectory.times
    currents = outputs.csv('sbe_currents.csv', solids_sbe.currents_frame(times, intra, inter))
    spectrum = solids_sbe.solid_harmonic_spectrum(times, intra, inter, pulse.omega, window=num.window)
    name = outputs.csv('solid_spectrum.csv', spectrum.to_frame())

    summary = {'max_excitation': float(np.max(trajectory.excitation)), 'bloch_drift': trajectory.bloch_drift,
               'max_gap_au': model.max_gap()}
    if model.dimension == 2:
        summary['polarization_ratio'] = spectrum.polarization_ratio()
    if num.sfa_interband:
        t_sfa, j_sfa = solids_sbe.sfa_interband_current(model, pulse, num.n_k, num.dt_au,
                                                        derivative=num.current_derivative,
                                                        berry_sign=num.berry_sign, pool=pool)
        outputs.csv('sfa_currents.csv', pd.DataFrame({_var.time: t_sfa, _var.currents[2]: j_sfa[:, 0],
                                                      _var.currents[3]: j_sfa[:, 1]}))

    nyquist = np.pi / (times[1] - times[0]) / pulse.omega
    max_order = float(min(nyquist, 60.0))
    keep = spectrum.order <= max_order
    figure = plots.spectrum_figure(spectrum.order[keep], {'intra': spectrum.intra[keep], 'inter': spectrum.inter[keep],
                                                          'total': spectrum.total[keep]}, 'Solid harmonic spectrum')
    context = dict(files={'currents': currents, 'spectrum': name}, max_order=max_order)
    grids = {'n_times': len(times), 'n_k_points': len(trajectory.k_points)}
    return grids, summary, context, figure


PIPELINES = {
    'ati': _run_ati,
    'hhg': _run_hhg,
    'orbits': _run_orbits,
    'nsdi': _run_nsdi,
    'quench': _run_quench,
    'selfconsistent': _run_selfconsistent,
    'solid': _run_solid,
}


def _file_records(out_dir, files):
    out_dir = Path(out_dir)
    return [{'path': Path(f).relative_to(out_dir).as_posix(), 'sha256': file_hash(f), 'bytes': Path(f).stat().st_size}
            for f in files]


def run_job(config):
    """Runs the pipeline of a validated config and writes its outputs

    Tables go to ``config.out_dir`` together with plot_<kind>.py (and an HTML
    figure when requested); manifest.json is written last. Library errors do
    not propagate: the outputs written so far move to partial/ and the
    manifest carries the failure record.

    :param RunConfig config: The configuration

    :return: The manifest
    :rtype: RunManifest

    """
    from sfakit import __version__ as version
    out_dir = config.out_dir
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f'Could not create output directory {out_dir}: {e}') from e

    outputs = _Outputs(out_dir)
    manifest = RunManifest(kind=config.kind, config=config.echo(), version=version, seed=config.seed,
                           threads=config.threads)
    start = time.perf_counter()
    logger.info(f'Starting {config.kind} run in {out_dir} on {config.threads} thread(s)')

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        try:
            with WorkerPool(config.threads) as pool:
                grids, summary, context, figure = PIPELINES[config.kind](config, pool, outputs)
            manifest.grids, manifest.summary = grids, summary
            if config.run.plot_script:
                outputs.add(write_plot_script(out_dir, config.kind, **context))
            if config.run.html:
                outputs.add(plots.write_html_figure(figure, out_dir / f'figure_{config.kind}.html'))
        except (SFAError, OSError, MemoryError) as e:
            error = e
            if isinstance(e, MemoryError):
                error = DomainError(f'The run does not fit in memory; reduce the grid sizes ({e!r})')
            elif not isinstance(e, SFAError):
                error = OutputError(str(e))
            manifest.failure = {'type': type(e).__name__, 'message': str(error), 'exit_code': error.exit_code}
            logger.error(f'{config.kind} run failed ({type(e).__name__}): {error}')
            outputs.files = move_to_partial(out_dir, outputs.files)

    manifest.warnings = [str(w.message) for w in caught]
    for message in manifest.warnings:
        logger.warning(message)
    manifest.files = _file_records(out_dir, outputs.files)
    manifest.wall_time = time.perf_counter() - start
    write_json_atomic(out_dir / MANIFEST, manifest.to_dict())
    logger.info(f'{config.kind} run finished in {manifest.wall_time:.2f} s with exit code {manifest.exit_code}')
    return manifest

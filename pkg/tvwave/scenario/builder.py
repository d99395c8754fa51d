from tvwave import logger
from tvwave.discretization.mesh_fem import ControlSpace, build_rect_mesh
from tvwave.discretization.wave_stepper import ForcingSpec, PointSource, TimeGrid, WaveStepper, \
    temporal_force_loads
from tvwave.observation.noise import NoiseModel
from tvwave.observation.observe import ObservationOperator
from tvwave.optimization.forward_op import ForwardOperator
from tvwave.optimization.pdps import PDPS, StepSizes
from tvwave.optimization.prox_reg import MultiBangLevels
from tvwave.scenario.config import ScenarioConfig


class Scenario:
    """All discrete objects of one configuration: mesh, control space, stepper, observation and forward map."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        config.validate()
        s = config.sections

        self.mesh = build_rect_mesh(config.domain, s['mesh']['nx'], s['mesh']['ny'])
        config.validate(self.mesh)
        self.grid = TimeGrid(s['time']['final_time'], s['time']['num_steps'])
        self.control_space = ControlSpace(self.mesh, config.control_region)
        self.levels = MultiBangLevels(s['control']['levels'])
        self.stepper = WaveStepper(self.mesh, self.grid, sigma=s['time']['sigma'],
                                   allow_cfl_violation=s['time']['allow_cfl_violation'])

        obs = s['observation']
        self.observation_op = ObservationOperator(self.mesh, self.grid, obs['kind'],
                                                  region=config.observation_region, patches=config.patches)
        self.forcing = ForcingSpec([PointSource(src['location'], src['amplitude'], src['frequency'], src['delay'],
                                                src['placement']) for src in s['forcing']['sources']],
                                   boundary_segment=config.boundary_segment)
        self.force_loads = temporal_force_loads(self.forcing, self.grid, self.mesh)
        self.forward_op = ForwardOperator(self.control_space, self.stepper, self.observation_op,
                                          offset=s['control']['offset'], force_loads=self.force_loads)
        noise = s['noise']
        self.noise_model = NoiseModel(noise['kind'], noise['level'], noise['num_terms'], noise['seed'])
        logger.info(f'Scenario {config.name or "custom"}: {self.mesh.nx}x{self.mesh.ny} nodes, '
                    f'{self.grid.num_steps} time steps, {self.control_space.num_dofs} control dofs, '
                    f'observation {obs["kind"]} of size {self.observation_op.size}.')

    @property
    def seed(self):
        return self.config['noise']['seed']

    def exact_control(self):
        exact = self.config['exact_coefficient']
        return self.control_space.interpolate_boxes(self.config.exact_boxes, background=exact['background'])

    def step_sizes(self):
        solver = self.config['solver']
        return StepSizes(solver['gamma_f'], solver['gamma_g'])

    def solver(self, y_d):
        solver = self.config['solver']
        reg = self.config['regularization']
        return PDPS(self.forward_op, y_d, self.levels, reg['alpha'], reg['beta'], self.step_sizes(),
                    tol=solver['tol'], max_iter=solver['max_iter'], check_every=solver['check_every'],
                    riesz_map=solver['riesz_map'])

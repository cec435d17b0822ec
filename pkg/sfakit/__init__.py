__version__ = "0.1.0"
import sfakit
from sfakit.general_settings.settings import Settings
from sfakit.input_output.config import parse_config
from sfakit.input_output.sfakit_io import read_csv, write_csv
from sfakit.main_modules.run_job import run_job
from sfakit.model_components.pulse import LaserPulse
from sfakit.model_components.targets import DoubleDeltaTarget1D, SeparableTarget
sfakit.settings = Settings()

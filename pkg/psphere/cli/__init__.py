from psphere.cli.config import build_spec, check_config, config
from psphere.cli.geomcheck import CheckRow, check_grid_point, geometry_suite, run_geomcheck
from psphere.cli.io import load_matrix, load_vector, report_frame, report_json, write_report
from psphere.cli.main import Runner, main
from psphere.cli.runners import run_boxqp, run_lasso, run_nnpca

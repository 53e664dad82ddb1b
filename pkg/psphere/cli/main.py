import sys
from typing import List, Optional

from loguru import logger

from psphere.cli.config import build_spec, check_config, config
from psphere.cli.geomcheck import run_geomcheck
from psphere.cli.runners import (
    EXIT_INVALID,
    EXIT_NO_INSTANCE,
    run_boxqp,
    run_lasso,
    run_nnpca,
)
from psphere.exceptions import InstanceGenerationError, PSphereError
from psphere.protocol import RunSpec
from psphere.utils import output_log

RUNNERS = {
    "nnpca": run_nnpca,
    "lasso": run_lasso,
    "boxqp": run_boxqp,
    "geomcheck": run_geomcheck,
}


class Runner:
    @classmethod
    def check_config(cls, spec: RunSpec):
        check_config(spec)

    @classmethod
    def config(cls):
        return config()

    def __init__(self, argv: Optional[List[str]] = None):
        args = Runner.config().parse_args(argv)
        self.spec = build_spec(args)
        self.check_config(self.spec)

    def run(self) -> int:
        try:
            return RUNNERS[self.spec.command](self.spec)
        finally:
            logger.complete()


def main(argv: Optional[List[str]] = None) -> int:
    try:
        runner = Runner(argv)
    except ValueError as err:
        # argparse, pydantic and psphere input errors all land here
        output_log(f"invalid arguments: {err}", "r", type="error")
        return EXIT_INVALID

    try:
        return runner.run()
    except InstanceGenerationError as err:
        output_log(str(err), "r", type="error")
        return EXIT_NO_INSTANCE
    except (PSphereError, ValueError, OSError) as err:
        output_log(str(err), "r", type="error")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

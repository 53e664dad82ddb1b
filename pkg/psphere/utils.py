import os
from dataclasses import dataclass, field
from datetime import datetime

import torch
from loguru import logger

from psphere.constants import DTYPE, EVENTS_LEVEL, EVENTS_LEVEL_NO


@dataclass
class Stats:
    start_time: datetime = field(default_factory=datetime.now)
    solves: int = 0
    converged: int = 0
    failures: int = 0

    def record(self, converged: bool) -> None:
        self.solves += 1
        if converged:
            self.converged += 1
        else:
            self.failures += 1

    @property
    def elapsed(self) -> float:
        return (datetime.now() - self.start_time).total_seconds()


#### Colors to use in the logs
COLORS = {
    "r": "\033[1;31;40m",
    "g": "\033[1;32;40m",
    "b": "\033[1;34;40m",
    "y": "\033[1;33;40m",
    "m": "\033[1;35;40m",
    "c": "\033[1;36;40m",
    "w": "\033[1;37;40m",
}


#### Utility function for coloring logs
def output_log(message: str, color_key: str = "w", type: str = "info") -> None:
    log = logger.info
    if type == "debug":
        log = logger.debug
    elif type == "warning":
        log = logger.warning
    elif type == "error":
        log = logger.error

    if color_key == "na" or os.environ.get("NO_COLOR"):
        log(f"{message}")
    else:
        log(f"{COLORS[color_key]}{message}{COLORS['w']}")


def sh(message: str):
    return f"{message: <12}"


#### Structured events
def register_events_level() -> None:
    try:
        logger.level(EVENTS_LEVEL)
    except ValueError:
        logger.level(EVENTS_LEVEL, no=EVENTS_LEVEL_NO, icon="📝")


def log_event(kind: str, **event) -> None:
    logger.bind(**event).log(EVENTS_LEVEL, kind)


register_events_level()


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator(device="cpu")
    generator.manual_seed(int(seed))
    return generator


def to_list(tensor: torch.Tensor) -> list:
    return [float(v) for v in tensor.detach().to(DTYPE).reshape(-1).tolist()]

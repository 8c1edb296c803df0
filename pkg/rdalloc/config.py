"""
Pipeline settings: built-in defaults, optionally overridden by a JSON file
(--config), in turn overridden by explicit command-line flags.
"""
import json
import logging
from rdalloc.errors import RDAllocError
from rdalloc.clustering import DEFAULT_K
from rdalloc.classifier import C_GRID, GAMMA_GRID

logger = logging.getLogger(__name__)

DEFAULTS = dict(
    k=DEFAULT_K,
    seed=0,
    n_init=10,
    max_iters=300,
    split=0.8,
    folds=5,
    c_grid=list(C_GRID),
    gamma_grid=list(GAMMA_GRID),
    crf_ladder=None,  # full grid
    sweep_k=None,
    sweep_n=None,
    workers=4,
)


class PipelineConfig(object):
    def __init__(self, **overrides):
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise RDAllocError("unknown config keys: %s" % ', '.join(sorted(unknown)))
        values = dict(DEFAULTS)
        values.update(overrides)
        self.__dict__.update(values)
        self.validate()

    def validate(self):
        if int(self.k) < 1:
            raise RDAllocError("k must be at least 1")
        if not 0 < float(self.split) < 1:
            raise RDAllocError("split must be in (0, 1)")
        if int(self.folds) < 2:
            raise RDAllocError("folds must be at least 2")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise RDAllocError("seed must be a 64-bit unsigned integer")
        if not self.c_grid or not self.gamma_grid:
            raise RDAllocError("SVM grids must not be empty")

    @classmethod
    def load(cls, path=None):
        if not path:
            return cls()
        try:
            with open(path, 'r') as f:
                overrides = json.load(f)
        except (IOError, ValueError) as e:
            raise RDAllocError("cannot read config %s: %s" % (path, e))
        logger.debug("Loaded config %s: %s", path, overrides)
        return cls(**overrides)

    def merge(self, args):
        """Return a copy with every non-None attribute of `args` that names a setting applied."""
        values = dict((key, getattr(self, key)) for key in DEFAULTS)
        for key in DEFAULTS:
            value = getattr(args, key, None)
            if value is not None:
                values[key] = value
        return PipelineConfig(**values)


def parse_float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def parse_int_list(text):
    values = []
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        if '-' in part:
            lo, hi = part.split('-', 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values

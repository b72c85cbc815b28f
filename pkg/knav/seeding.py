from numpy.random import SeedSequence, default_rng
import hashlib


def stage_key(stage: str) -> int:
    return int.from_bytes(hashlib.sha256(stage.encode("utf-8")).digest()[:8], "big")


def stage_seed(seed: int, stage: str, *indices) -> SeedSequence:
    """
    Independent substream for one pipeline stage, derived from the run seed, the stage name
    and any integer indices (control step, horizon step, ...).
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative, got {0}".format(seed))
    return SeedSequence([seed, stage_key(stage)] + [int(i) for i in indices])


def stage_rng(seed: int, stage: str, *indices):
    return default_rng(stage_seed(seed, stage, *indices))

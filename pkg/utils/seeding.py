import random

import numpy as np
import torch


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of integers (episode, step, ...)."""
    return int(np.random.SeedSequence([abs(int(p)) for p in parts]).generate_state(1, dtype=np.uint64)[0] >> 1)


def torch_generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)

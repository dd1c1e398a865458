import random

from hypothesis import settings

from pcnflow.cli import generate_instance
from pcnflow.model import RebalancingInstance

settings.register_profile("pcnflow", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("pcnflow")


def random_small_instance(
    seed: int,
    max_nodes: int = 6,
    max_edges: int = 10,
    cap_max: int = 5,
    weight_max: int = 1,
    dense: bool = False,
) -> RebalancingInstance:
    """Seeded random instance for cross-checking against the oracle."""
    rng = random.Random(seed)
    n = rng.randint(3, max_nodes)
    limit = min(max_edges, n * (n - 1) // 2)
    m = limit if dense else rng.randint(2, limit)
    return generate_instance(n, m, cap_max=cap_max, weight_max=weight_max, seed=seed)

import numpy as np
import pytest

from nordheim import (
    EnergyGrid,
    QuadratureSpec,
    build_tensor,
    eta_rational,
    hard_sphere,
    load_tensor,
    save_tensor,
)


@pytest.fixture(scope="session")
def eta2_model():
    return eta_rational(1.0, 2.0)


@pytest.fixture(scope="session")
def hs_model():
    return hard_sphere()


class TensorStore:
    """Session-wide tensor cache backed by the binary cache format."""

    def __init__(self, cache_dir):
        self.cache_dir = cache_dir
        self._mem = {}

    def get(self, model, grid, quad=QuadratureSpec()):
        key = (model.potential_hash(), grid.n, grid.x_max,
               quad.s_order, quad.theta_order)
        if key in self._mem:
            return self._mem[key]
        path = self.cache_dir / ("%016x_n%d_x%r_s%d_t%d.bin" % key)
        if path.exists():
            tensor = load_tensor(path, n=grid.n, x_max=grid.x_max, quad=quad,
                                 potential_hash=model.potential_hash())
        else:
            tensor = build_tensor(model, grid, quad)
            save_tensor(tensor, path)
        self._mem[key] = tensor
        return tensor


@pytest.fixture(scope="session")
def tensor_store(tmp_path_factory):
    return TensorStore(tmp_path_factory.mktemp("kernel_cache"))


@pytest.fixture(scope="session")
def grid96_x16():
    return EnergyGrid(96, 16.0)


@pytest.fixture(scope="session")
def grid16_x8():
    return EnergyGrid(16, 8.0)


@pytest.fixture(scope="session")
def tensor_eta2_96(tensor_store, eta2_model, grid96_x16):
    return tensor_store.get(eta2_model, grid96_x16)


@pytest.fixture(scope="session")
def tensor_eta2_16(tensor_store, eta2_model, grid16_x8):
    return tensor_store.get(eta2_model, grid16_x8)


@pytest.fixture(scope="session")
def tensor_hs_16(tensor_store, hs_model, grid16_x8):
    return tensor_store.get(hs_model, grid16_x8)


def random_state(grid, seed=0, amplitude=1.0):
    rng = np.random.default_rng(seed)
    from nordheim import DistributionState

    return DistributionState(grid, amplitude * rng.random(grid.n))


# Naive triple-loop reference for the collision rates: the independent oracle
# for the vectorized path (acceptance criterion: they must agree to 1e-12).
def naive_rates(lam, f, grid):
    n = grid.n
    h2 = grid.h * grid.h
    gain = np.zeros(n)
    loss = np.zeros(n)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                istar = j + k - i
                if istar < 0 or istar >= n:
                    continue
                lv = lam[i, j, k]
                gain[i] += lv * f[j] * f[k] * (1.0 + f[i] + f[istar])
                loss[i] += lv * f[istar] * (1.0 + f[j] + f[k])
        gain[i] *= h2 / np.sqrt(grid.nodes[i])
        loss[i] *= h2 / np.sqrt(grid.nodes[i])
    return gain, loss

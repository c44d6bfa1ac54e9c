import numpy as np
from numba import njit


@njit(cache=True)
def anneal(linear, indptr, indices, data, betas, seeds):
    """Metropolis single-flip annealing, one run per seed.

    ``indptr/indices/data`` is the symmetric CSR coupling matrix. Each run
    starts from a uniform random state and sweeps variables in index order.
    """
    num_reads = seeds.shape[0]
    n = linear.shape[0]
    states = np.empty((num_reads, n), dtype=np.int8)
    field = np.empty(n)
    for r in range(num_reads):
        np.random.seed(seeds[r])
        x = states[r]
        for k in range(n):
            x[k] = 1 if np.random.random() < 0.5 else 0
        for k in range(n):
            f = linear[k]
            for p in range(indptr[k], indptr[k + 1]):
                if x[indices[p]]:
                    f += data[p]
            field[k] = f
        for s in range(betas.shape[0]):
            beta = betas[s]
            for k in range(n):
                delta = field[k] if x[k] == 0 else -field[k]
                if delta <= 0.0 or np.random.random() < np.exp(-beta * delta):
                    sign = 1.0 if x[k] == 0 else -1.0
                    x[k] = 1 - x[k]
                    for p in range(indptr[k], indptr[k + 1]):
                        field[indices[p]] += sign * data[p]
    return states

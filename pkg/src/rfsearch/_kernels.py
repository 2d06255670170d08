"""Hot numeric kernels for the toy trainer.

Two interchangeable implementations: numba ``@njit`` loops (default) and a
vectorized pure-numpy path. Selection is made at import time from the
``RFSEARCH_NUMBA`` environment variable ("0"/"off"/"numpy" forces the numpy
path); both produce bit-identical outputs, which ``benchmarks/bench_kernels.py``
checks while timing them.

The random numbers are a counter-based splitmix64 scheme (documented in
docs/toy_task.md) so that foreign trainer implementations can reproduce
rollouts exactly: every draw is a pure function of (seed, stream, index).
Gaussians are the sum of 12 uniforms minus 6, which keeps all arithmetic
exactly portable across languages.
"""

from __future__ import annotations

import os

import numpy as np

U64 = np.uint64
_MASK = (1 << 64) - 1
_GAMMA_INT = 0x9E3779B97F4A7C15
_M1_INT = 0xBF58476D1CE4E5B9
_M2_INT = 0x94D049BB133111EB
GAMMA = U64(_GAMMA_INT)
M1 = U64(_M1_INT)
M2 = U64(_M2_INT)
_INV53 = float(2.0**-53)

# Stream ids for the toy trainer (see docs/toy_task.md).
STREAM_TRAIN_START = 1
STREAM_NOISE = 2
STREAM_EVAL_START = 3

# Reach-task constants. Changing any of these invalidates the shared task
# document that external trainers implement against.
TARGET_X = 1.0
MAX_STEPS = 50
ACCEL = 0.2
STEP_SCALE = 0.2
VEL_CAP = 1.0
VEL_DAMPING = 0.7
SLOPE_ACCEL = 0.05
SUCCESS_DIST = 0.05
ERR_EDGES = np.array([-0.8, -0.3, -0.05, 0.05, 0.3, 0.8])
VEL_EDGES = np.empty(0, dtype=np.float64)
N_ERR_BINS = len(ERR_EDGES) + 1
N_VEL_BINS = len(VEL_EDGES) + 1
POLICY_DIM = N_ERR_BINS * N_VEL_BINS


def mix64_int(z: int) -> int:
    """splitmix64 finalizer over python ints (used for seed derivation)."""
    z = (z + _GAMMA_INT) & _MASK
    z = ((z ^ (z >> 30)) * _M1_INT) & _MASK
    z = ((z ^ (z >> 27)) * _M2_INT) & _MASK
    return z ^ (z >> 31)


def stream_base(seed: int, stream: int) -> int:
    return mix64_int((seed & _MASK) ^ ((stream + 1) * _GAMMA_INT & _MASK))


# --- numpy implementations -----------------------------------------------


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + GAMMA
    z = (z ^ (z >> U64(30))) * M1
    z = (z ^ (z >> U64(27))) * M2
    return z ^ (z >> U64(31))


def _rand_u64_np(base: int, index: np.ndarray) -> np.ndarray:
    return _mix64_np(U64(base) ^ ((index + U64(1)) * M1))


def uniform_array_numpy(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """count uniforms in [0, 1) at indices start..start+count-1."""
    base = stream_base(seed, stream)
    idx = np.arange(start, start + count, dtype=np.uint64)
    return (_rand_u64_np(base, idx) >> U64(11)).astype(np.float64) * _INV53


def sample_noise_numpy(seed: int, gen: int, pop: int, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Population parameter matrix: mu + sigma * normal, portable gaussians."""
    dim = mu.shape[0]
    base = stream_base(seed, STREAM_NOISE)
    flat = np.arange(gen * pop * dim, (gen + 1) * pop * dim, dtype=np.uint64)
    acc = np.zeros(pop * dim, dtype=np.float64)
    for j in range(12):
        idx = flat * U64(12) + U64(j)
        acc += (_rand_u64_np(base, idx) >> U64(11)).astype(np.float64) * _INV53
    noise = (acc - 6.0).reshape(pop, dim)
    return mu[None, :] + sigma[None, :] * noise


def rollout_batch_numpy(thetas: np.ndarray, x0: np.ndarray):
    """Roll out one episode per population member under its action table.

    Returns (prev_dist, dist, vel, action_mag, lengths, success); trajectory
    arrays are (pop, MAX_STEPS). Every episode runs the full MAX_STEPS;
    success means ending within SUCCESS_DIST of the target.
    """
    pop = thetas.shape[0]
    prev_dist = np.zeros((pop, MAX_STEPS))
    dist = np.zeros((pop, MAX_STEPS))
    vel = np.zeros((pop, MAX_STEPS))
    amag = np.zeros((pop, MAX_STEPS))
    lengths = np.full(pop, MAX_STEPS, dtype=np.int64)

    success = np.zeros(pop, dtype=np.bool_)
    x = x0.astype(np.float64).copy()
    v = np.zeros(pop)
    rows = np.arange(pop)
    active = np.ones(pop, dtype=np.bool_)
    for t in range(MAX_STEPS):
        if not active.any():
            break
        err = TARGET_X - x
        ebin = np.digitize(err, ERR_EDGES)
        vbin = np.digitize(v, VEL_EDGES)
        a = thetas[rows, ebin * N_VEL_BINS + vbin]
        a = np.minimum(np.maximum(a, -1.0), 1.0)
        v_new = np.minimum(np.maximum(VEL_DAMPING * v + ACCEL * a - SLOPE_ACCEL, -VEL_CAP), VEL_CAP)
        x_new = x + STEP_SCALE * v_new

        d_new = np.abs(TARGET_X - x_new)
        prev_dist[active, t] = np.abs(err[active])
        dist[active, t] = d_new[active]
        vel[active, t] = v_new[active]
        amag[active, t] = np.abs(a[active])

        done = active & (d_new < SUCCESS_DIST)
        lengths[done] = t + 1
        success[done] = True
        x = np.where(active, x_new, x)
        v = np.where(active, v_new, v)
        active = active & ~done
    return prev_dist, dist, vel, amag, lengths, success


# --- numba implementations -----------------------------------------------

_env = os.environ.get("RFSEARCH_NUMBA", "auto").lower()
_want_numba = _env not in ("0", "off", "numpy", "false")
HAVE_NUMBA = False

if _want_numba:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:
        HAVE_NUMBA = False

if HAVE_NUMBA:

    @njit(cache=True)
    def _mix64(z):
        z = z + GAMMA
        z = (z ^ (z >> U64(30))) * M1
        z = (z ^ (z >> U64(27))) * M2
        return z ^ (z >> U64(31))

    @njit(cache=True)
    def _rand_u64(base, index):
        return _mix64(base ^ ((index + U64(1)) * M1))

    @njit(cache=True)
    def _uniform_fill(base, start, out):
        for i in range(out.shape[0]):
            r = _rand_u64(base, U64(start + i))
            out[i] = (r >> U64(11)) * _INV53

    def uniform_array_numba(seed: int, stream: int, start: int, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        _uniform_fill(U64(stream_base(seed, stream)), start, out)
        return out

    @njit(cache=True)
    def _noise_fill(base, gen, pop, dim, mu, sigma, out):
        for m in range(pop):
            for d in range(dim):
                flat = (gen * pop + m) * dim + d
                acc = 0.0
                for j in range(12):
                    r = _rand_u64(base, U64(flat * 12 + j))
                    acc += (r >> U64(11)) * _INV53
                out[m, d] = mu[d] + sigma[d] * (acc - 6.0)

    def sample_noise_numba(seed: int, gen: int, pop: int, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        out = np.empty((pop, mu.shape[0]), dtype=np.float64)
        _noise_fill(U64(stream_base(seed, STREAM_NOISE)), gen, pop, mu.shape[0], mu, sigma, out)
        return out

    @njit(cache=True)
    def _rollout(thetas, x0, err_edges, vel_edges, prev_dist, dist, vel, amag, lengths, success):
        pop = thetas.shape[0]
        n_vel = vel_edges.shape[0] + 1
        for m in range(pop):
            x = x0[m]
            v = 0.0
            lengths[m] = MAX_STEPS
            for t in range(MAX_STEPS):
                err = TARGET_X - x
                ebin = 0
                for e in err_edges:
                    if err >= e:
                        ebin += 1
                vbin = 0
                for e in vel_edges:
                    if v >= e:
                        vbin += 1
                a = thetas[m, ebin * n_vel + vbin]
                a = min(max(a, -1.0), 1.0)
                v_new = min(max(VEL_DAMPING * v + ACCEL * a - SLOPE_ACCEL, -VEL_CAP), VEL_CAP)
                x_new = x + STEP_SCALE * v_new

                d_new = abs(TARGET_X - x_new)
                prev_dist[m, t] = abs(err)
                dist[m, t] = d_new
                vel[m, t] = v_new
                amag[m, t] = abs(a)

                x = x_new
                v = v_new
                if d_new < SUCCESS_DIST:
                    lengths[m] = t + 1
                    success[m] = True
                    break

    def rollout_batch_numba(thetas: np.ndarray, x0: np.ndarray):
        pop = thetas.shape[0]
        prev_dist = np.zeros((pop, MAX_STEPS))
        dist = np.zeros((pop, MAX_STEPS))
        vel = np.zeros((pop, MAX_STEPS))
        amag = np.zeros((pop, MAX_STEPS))
        lengths = np.empty(pop, dtype=np.int64)
        success = np.zeros(pop, dtype=np.bool_)
        _rollout(
            np.ascontiguousarray(thetas, dtype=np.float64),
            np.ascontiguousarray(x0, dtype=np.float64),
            ERR_EDGES,
            VEL_EDGES,
            prev_dist,
            dist,
            vel,
            amag,
            lengths,
            success,
        )
        return prev_dist, dist, vel, amag, lengths, success

else:
    uniform_array_numba = None
    sample_noise_numba = None
    rollout_batch_numba = None


if HAVE_NUMBA:
    uniform_array = uniform_array_numba
    sample_noise = sample_noise_numba
    rollout_batch = rollout_batch_numba
else:
    uniform_array = uniform_array_numpy
    sample_noise = sample_noise_numpy
    rollout_batch = rollout_batch_numpy


def active_backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"

import numpy as np

from clocklmi.sdp import Block, SdpProblem


def planted_problem(seed, nvars=None, sizes=None):
    """Random blocks with a strictly feasible point ``y*`` built in."""
    rng = np.random.default_rng(seed)
    nvars = nvars or int(rng.integers(1, 7))
    sizes = sizes or [int(s) for s in rng.integers(1, 5, size=rng.integers(1, 4))]
    ystar = rng.uniform(-1, 1, nvars)
    blocks = []
    for k in sizes:
        Fs = []
        for _ in range(nvars):
            M = rng.standard_normal((k, k))
            Fs.append(M + M.T)
        S = sum(y * F for y, F in zip(ystar, Fs))
        R = rng.standard_normal((k, k))
        F0 = R @ R.T + 0.1 * np.eye(k) - S  # F0 + sum y* F = R R^T + 0.1 I
        F0 = 0.5 * (F0 + F0.T)
        iu, ju = np.triu_indices(k)
        var = np.repeat(np.arange(nvars), iu.size)
        row = np.tile(iu, nvars)
        col = np.tile(ju, nvars)
        val = np.concatenate([F[iu, ju] for F in Fs])
        blocks.append(Block(k, F0=F0, var=var, row=row, col=col, val=val))
    # keep the feasible set bounded
    for i in range(nvars):
        blocks.append(Block(2, F0=np.diag([5.0, 5.0]), var=[i, i], row=[0, 1], col=[0, 1],
                            val=[1.0, -1.0], diagonal=True))
    return SdpProblem(nvars, blocks), ystar

"""Pure numpy implementations of the inner loops, vectorised over trials.

Semantics are the reference for ``ttsa._kernel``: both advance a block of
independent trials through ``n`` steps of the affine coupled iteration,
tracking the averaged slow noise ``U`` and the auxiliary iterate ``z`` by
their own recursions, and copy the state after step ``s`` into output row
``rec_row0 + r`` whenever ``s == rec_steps[r]``.
"""

import numpy as np


def advance_affine(A, B, c, C, D, e, x, y, U, z, Wf, Ws, alphas, betas,
                   rec_steps, rec_row0, out_x, out_y, out_U, out_z):
    T, d1 = x.shape
    d2 = y.shape[1]
    pf, ps = Wf.shape[3], Ws.shape[3]
    At, Bt, Ct, Dt = A.T, B.T, C.T, D.T
    w = np.empty((T, 1 + d1 + d2))
    w[:, 0] = 1.0
    rec = {int(s): r for r, s in enumerate(rec_steps)}
    for s in range(alphas.shape[0]):
        a = alphas[s]
        b = betas[s]
        w[:, 1:1 + d1] = x
        w[:, 1 + d1:] = y
        fx = x @ At + y @ Bt + c
        gy = x @ Ct + y @ Dt + e
        mf = np.einsum("tij,tj->ti", Wf[:, s], w[:, :pf]) if pf else 0.0
        ms = np.einsum("tij,tj->ti", Ws[:, s], w[:, :ps]) if ps else 0.0
        x += a * (fx - x + mf)
        y += b * (gy - y + ms)
        U *= 1.0 - b
        U += b * ms
        z *= 1.0 - b
        z += b * gy
        nrm = np.einsum("ti,ti->t", x, x) + np.einsum("ti,ti->t", y, y)
        if not np.all(np.isfinite(nrm)):
            t = int(np.flatnonzero(~np.isfinite(nrm))[0])
            return t, s, float(np.sqrt(nrm[t]))
        r = rec.get(s)
        if r is not None:
            out_x[:, rec_row0 + r] = x
            out_y[:, rec_row0 + r] = y
            out_U[:, rec_row0 + r] = U
            out_z[:, rec_row0 + r] = z
    return None


def aux_recursion(decay, eps):
    """``s[0] = 0``, ``s[k+1] = decay[k] * s[k] + eps[k]``."""
    n = len(decay)
    out = np.empty(n + 1)
    s = 0.0
    out[0] = s
    for k, (dk, ek) in enumerate(zip(decay.tolist(), eps.tolist())):
        s = dk * s + ek
        out[k + 1] = s
    return out

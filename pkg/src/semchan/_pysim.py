"""Numpy versions of the simulator kernels, used when the extension is absent."""
import numpy as np

TIE_TOL = 1e-9


def sample_outputs(uniforms, codeword, cdf):
    uniforms = np.asarray(uniforms, dtype=float)
    codeword = np.asarray(codeword, dtype=np.int64)
    if codeword.shape[0] != uniforms.shape[1]:
        raise ValueError("codeword length differs from the uniform block width")
    out = np.empty(uniforms.shape, dtype=np.int64)
    last = cdf.shape[1] - 1
    for i, x in enumerate(codeword):
        out[:, i] = np.minimum(np.searchsorted(cdf[x], uniforms[:, i], side="right"), last)
    return out


def ml_decode(received, codebook, logw):
    received = np.asarray(received, dtype=np.int64)
    codebook = np.asarray(codebook, dtype=np.int64)
    if codebook.shape[1] != received.shape[1]:
        raise ValueError("codebook blocklength differs from the received blocks")
    ll = np.zeros((received.shape[0], codebook.shape[0]))
    for i in range(received.shape[1]):
        ll += logw[codebook[:, i][None, :], received[:, i][:, None]]
    best = ll.max(axis=1, keepdims=True)
    return np.argmax(ll >= best - TIE_TOL, axis=1).astype(np.int64)

"""Pure-numpy convolution kernels (fallback backend).

All accumulation happens in float64 regardless of the input dtype; results
are cast back to the input dtype. Shapes follow the NCHW convention.
"""

import numpy as np

BACKEND_NAME = "python"


def _patches(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """View of shape (N, C, kh, kw, OH, OW) over the padded input."""
    n, c, _, wpad = xp.shape
    sn, sc, sh, sw = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, oh, ow),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    n, cin, h, wid = x.shape
    cout, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wid + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))).astype(np.float64)
    pat = _patches(xp, kh, kw, stride, oh, ow)
    y = np.tensordot(pat, w.astype(np.float64), axes=([1, 2, 3], [1, 2, 3]))
    # tensordot output is (N, OH, OW, Cout)
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2)).astype(x.dtype)


def conv2d_backward_input(dy: np.ndarray, w: np.ndarray, stride: int, pad: int,
                          h: int, wid: int) -> np.ndarray:
    n, cout, oh, ow = dy.shape
    _, cin, kh, kw = w.shape
    dy64 = dy.astype(np.float64)
    w64 = w.astype(np.float64)
    dxp = np.zeros((n, cin, h + 2 * pad, wid + 2 * pad), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            # (N, OH, OW, Cin) contribution of kernel tap (i, j)
            g = np.tensordot(dy64, w64[:, :, i, j], axes=([1], [0]))
            dxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += \
                g.transpose(0, 3, 1, 2)
    dx = dxp[:, :, pad:pad + h, pad:pad + wid]
    return np.ascontiguousarray(dx).astype(dy.dtype)


def conv2d_backward_weight(dy: np.ndarray, x: np.ndarray, stride: int, pad: int,
                           kh: int, kw: int) -> np.ndarray:
    n, cout, oh, ow = dy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))).astype(np.float64)
    pat = _patches(xp, kh, kw, stride, oh, ow)
    dw = np.tensordot(dy.astype(np.float64), pat, axes=([0, 2, 3], [0, 4, 5]))
    return dw.astype(dy.dtype)

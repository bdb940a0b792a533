import numpy as np
import sympy as sp
from numpy.typing import ArrayLike

from meshless_ddm.solver.nets import JetBatch, Mlp
from meshless_ddm.solver.problems import ProblemSpec


def with_flat(net: Mlp, vector: ArrayLike) -> Mlp:
    """A new network shaped like ``net`` holding the flat parameter ``vector``."""
    arrays = np.split(np.asarray(vector, dtype=np.float64), np.cumsum([p.size for p in net.parameters()])[:-1])
    shaped = [flat.reshape(p.shape) for flat, p in zip(arrays, net.parameters())]
    return Mlp.from_arrays(shaped[::2], shaped[1::2])


def exact_jet(spec: ProblemSpec, points: ArrayLike) -> JetBatch:
    """Value, gradient and Hessian of the manufactured solution, derived symbolically."""
    x, y = sp.symbols("x y", real=True)
    u = sp.sympify(spec.expression, locals={"x": x, "y": y})
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    terms = [u, sp.diff(u, x), sp.diff(u, y), sp.diff(u, x, 2), sp.diff(u, y, 2), sp.diff(u, x, y)]
    value, u_x, u_y, u_xx, u_yy, u_xy = (
        np.broadcast_to(np.asarray(sp.lambdify((x, y), term, "numpy")(p[:, 0], p[:, 1]), dtype=np.float64), len(p))
        for term in terms
    )
    return JetBatch(
        value=value.copy(),
        grad=np.column_stack([u_x, u_y]),
        hess=np.column_stack([u_xx, u_yy, u_xy]),
    )

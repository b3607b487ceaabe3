# File: services/geometry.py
"""Perfis de seção transversal do canal e a geometria associada.

O canal tubular estreito é descrito no limite unidimensional pela área
h(x) = g0(x)^2 da seção em x in [0, 1]. Aqui ficam:

- ``ChannelProfile``: os quatro tipos de perfil (constante, afim, bump, amostrado);
- ``geometry_factor``: rho0 = int h^-1 e o volume int h;
- ``jacobian_products``: a álgebra da mudança de coordenadas do domínio fino;
- ``build_foliation``: a construção da extensão H(X, Y, Z) de h a partir da parede.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.integrate import IntegrationWarning
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from utils.errors import (
    DegenerateGeometry,
    InvalidProfile,
    OutOfDomain,
    QuadratureFailure,
    RootFindFailure,
)

logger = logging.getLogger(__name__)

PROFILE_KINDS = ("constant", "affine", "bump", "sampled")
_CHECK_POINTS = np.linspace(0.0, 1.0, 1001)
_QUAD_LIMIT = 200


@dataclass(frozen=True)
class ChannelProfile:
    """Área da seção transversal h(x) > 0 em [0, 1].

    ``params`` depende de ``kind``:
    constant -> (c,), affine -> (a, b), bump -> (base, amplitude, width, center).
    Perfis amostrados usam ``nodes``/``values`` com interpolação PCHIP.
    """

    kind: str
    params: tuple = ()
    nodes: tuple = ()
    values: tuple = ()
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise InvalidProfile(f"Tipo de perfil desconhecido: '{self.kind}'")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "nodes", tuple(float(p) for p in self.nodes))
        object.__setattr__(self, "values", tuple(float(p) for p in self.values))

        expected = {"constant": 1, "affine": 2, "bump": 4, "sampled": 0}[self.kind]
        if len(self.params) != expected:
            raise InvalidProfile(
                f"Perfil '{self.kind}' espera {expected} parâmetros, recebeu {len(self.params)}"
            )
        if self.kind == "bump" and self.params[2] <= 0:
            raise InvalidProfile("A largura do bump deve ser positiva")
        if self.kind == "sampled":
            self._build_interpolant()

        sample = self._evaluate(_CHECK_POINTS)
        if not np.all(np.isfinite(sample)) or np.min(sample) <= 0:
            raise InvalidProfile(
                f"h(x) deve ser positiva em [0, 1] (mínimo amostrado {np.min(sample):.3e})"
            )

    def _build_interpolant(self):
        nodes = np.asarray(self.nodes)
        values = np.asarray(self.values)
        if nodes.size < 2 or nodes.size != values.size:
            raise InvalidProfile("Perfil amostrado exige nós e valores do mesmo tamanho (>= 2)")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidProfile("Os nós do perfil amostrado devem ser estritamente crescentes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise InvalidProfile("Os nós do perfil amostrado devem cobrir [0, 1]")
        if np.any(values <= 0):
            raise InvalidProfile("Os valores do perfil amostrado devem ser positivos")
        object.__setattr__(self, "_interp", PchipInterpolator(nodes, values))

    # --- construtores ---

    @classmethod
    def constant(cls, c: float = 1.0) -> "ChannelProfile":
        return cls("constant", (c,))

    @classmethod
    def affine(cls, a: float, b: float) -> "ChannelProfile":
        return cls("affine", (a, b))

    @classmethod
    def bump(cls, base: float, amplitude: float, width: float, center: float = 0.5) -> "ChannelProfile":
        return cls("bump", (base, amplitude, width, center))

    @classmethod
    def sampled(cls, nodes, values) -> "ChannelProfile":
        return cls("sampled", (), tuple(nodes), tuple(values))

    # --- avaliação ---

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "affine":
            a, b = self.params
            return a + b * x
        if self.kind == "bump":
            base, amplitude, width, center = self.params
            return base + amplitude * np.exp(-(((x - center) / width) ** 2))
        return self._interp(x)

    def _evaluate_derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "affine":
            return np.full_like(x, self.params[1])
        if self.kind == "bump":
            base, amplitude, width, center = self.params
            z = (x - center) / width
            return -2.0 * amplitude * z / width * np.exp(-(z**2))
        return self._interp.derivative()(x)

    def h(self, x):
        """h(x) vetorizada; rejeita pontos fora de [0, 1]."""
        return _checked(self._evaluate, x)

    def dh(self, x):
        """Derivada h'(x), usada pelo termo h_tau/h do campo rápido."""
        return _checked(self._evaluate_derivative, x)

    def scaled(self, factor: float) -> "ChannelProfile":
        if self.kind == "constant":
            return ChannelProfile.constant(self.params[0] * factor)
        if self.kind == "affine":
            a, b = self.params
            return ChannelProfile.affine(a * factor, b * factor)
        if self.kind == "bump":
            base, amplitude, width, center = self.params
            return ChannelProfile.bump(base * factor, amplitude * factor, width, center)
        return ChannelProfile.sampled(self.nodes, [v * factor for v in self.values])

    # --- serialização ---

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.params[0]}
        if self.kind == "affine":
            return {"kind": "affine", "a": self.params[0], "b": self.params[1]}
        if self.kind == "bump":
            base, amplitude, width, center = self.params
            return {"kind": "bump", "base": base, "amplitude": amplitude, "width": width, "center": center}
        return {"kind": "sampled", "nodes": list(self.nodes), "values": list(self.values)}

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelProfile":
        data = dict(data)
        kind = data.pop("kind", None)
        allowed = {
            "constant": {"value"},
            "affine": {"a", "b"},
            "bump": {"base", "amplitude", "width", "center"},
            "sampled": {"nodes", "values"},
        }
        if kind not in allowed:
            raise InvalidProfile(f"Tipo de perfil desconhecido: '{kind}'")
        unknown = set(data) - allowed[kind]
        if unknown:
            raise InvalidProfile(f"Chaves desconhecidas no perfil '{kind}': {sorted(unknown)}")
        try:
            if kind == "constant":
                return cls.constant(data.get("value", 1.0))
            if kind == "affine":
                return cls.affine(data["a"], data["b"])
            if kind == "bump":
                return cls.bump(data["base"], data["amplitude"], data["width"], data.get("center", 0.5))
            return cls.sampled(data["nodes"], data["values"])
        except KeyError as e:
            raise InvalidProfile(f"Perfil '{kind}' sem o parâmetro {e}") from e
        except (TypeError, ValueError) as e:
            raise InvalidProfile(f"Parâmetros inválidos para o perfil '{kind}': {e}") from e


def _checked(fn, x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise OutOfDomain("x deve pertencer a [0, 1]")
    out = fn(arr)
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class GeometrySummary:
    rho0: float
    volume_integral: float


def eval_h(profile: ChannelProfile, x):
    return profile.h(x)


def _quad(fn, profile: ChannelProfile, quadrature_tol: float) -> float:
    points = list(profile.nodes[1:-1]) if profile.kind == "sampled" else None
    if points is not None and not points:
        points = None
    limit = _QUAD_LIMIT + (len(profile.nodes) if profile.kind == "sampled" else 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                fn, 0.0, 1.0, epsabs=quadrature_tol, epsrel=0.0, limit=limit, points=points
            )
        except IntegrationWarning as e:
            raise QuadratureFailure(f"Quadratura não atingiu a tolerância {quadrature_tol:g}: {e}") from e
    return value


def geometry_factor(profile: ChannelProfile, quadrature_tol: float = 1e-10) -> GeometrySummary:
    """rho0 = int_0^1 h^-1 e volume = int_0^1 h por quadratura adaptativa."""
    rho0 = _quad(lambda x: 1.0 / profile._evaluate(x), profile, quadrature_tol)
    volume = _quad(lambda x: profile._evaluate(x), profile, quadrature_tol)
    logger.debug(f"Geometria '{profile.kind}': rho0={rho0:.12g}, volume={volume:.12g}")
    return GeometrySummary(rho0=rho0, volume_integral=volume)


def normalize_volume(profile: ChannelProfile, quadrature_tol: float = 1e-12) -> ChannelProfile:
    volume = geometry_factor(profile, quadrature_tol).volume_integral
    return profile.scaled(1.0 / volume)


def inverse_area_integral(profile: ChannelProfile, x, quadrature_tol: float = 1e-12):
    """I(x) = int_0^x h^-1, vetorizado; I(1) = rho0."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise OutOfDomain("x deve pertencer a [0, 1]")
    order = np.argsort(xs)
    out = np.empty_like(xs)
    acc, last = 0.0, 0.0
    for idx in order:
        xi = xs[idx]
        if xi > last:
            acc += integrate.quad(
                lambda s: 1.0 / profile._evaluate(s), last, xi,
                epsabs=quadrature_tol, epsrel=1e-13, limit=_QUAD_LIMIT,
            )[0]
            last = xi
        out[idx] = acc
    return float(out[0]) if np.ndim(x) == 0 else out


def cell_integrals(profile: ChannelProfile, nodes: np.ndarray, order: int = 8):
    """Integrais de h^-1 e de h em cada célula [x_j, x_j+1] (Gauss–Legendre).

    Retorna (resistência, volume) por célula; a resistência é Δx dividido
    pela média harmônica de h na célula.
    """
    nodes = np.asarray(nodes, dtype=float)
    t, wts = leggauss(order)
    left, right = nodes[:-1], nodes[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    pts = mid[:, None] + half[:, None] * t[None, :]
    hv = profile._evaluate(pts)
    resistance = half * np.sum(wts[None, :] / hv, axis=1)
    volume = half * np.sum(wts[None, :] * hv, axis=1)
    return resistance, volume


# --- Domínio fino tridimensional ---

@dataclass(frozen=True)
class CoordinateJacobians:
    J: np.ndarray
    J_inv: np.ndarray
    JJt: np.ndarray
    det_J_inv: float


def jacobian_products(g: float, g_x: float, y: float, z: float) -> CoordinateJacobians:
    """Jacobianos da mudança (X, Y, Z) -> (x, y, z) = (X, Y/g, Z/g)."""
    if not g > 0:
        raise DegenerateGeometry(f"g deve ser positiva (g={g})")
    J = np.array([
        [1.0, 0.0, 0.0],
        [-g_x * y / g, 1.0 / g, 0.0],
        [-g_x * z / g, 0.0, 1.0 / g],
    ])
    J_inv = np.array([
        [1.0, 0.0, 0.0],
        [g_x * y, g, 0.0],
        [g_x * z, 0.0, g],
    ])
    JJt = J @ J.T
    det = float(np.linalg.det(J_inv))
    if not np.isclose(det, g * g, rtol=1e-12, atol=0.0):
        raise DegenerateGeometry(f"det(J^-1)={det:.16g} difere de g^2={g * g:.16g}")
    return CoordinateJacobians(J=J, J_inv=J_inv, JJt=JJt, det_J_inv=det)


@dataclass(frozen=True)
class WallFunction:
    """Raio da parede g(X, eps) do domínio fino e sua derivada em X."""

    g: Callable[[float, float], float]
    g_x: Callable[[float, float], float]
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidProfile("eps deve ser positivo")
        radius = np.array([self.g(X, self.eps) for X in _CHECK_POINTS])
        if np.min(radius) <= 0:
            raise InvalidProfile("g(X, eps) deve ser positiva em [0, 1]")
        scale = max(np.max(np.abs(radius)), 1.0)
        for X in (0.0, 1.0):
            if abs(self.g_x(X, self.eps)) > 1e-10 * scale:
                raise InvalidProfile(f"g'(X, eps) deve se anular em X={X:g}")

    def radius(self, X: float) -> float:
        return self.g(X, self.eps)

    def slope(self, X: float) -> float:
        return self.g_x(X, self.eps)

    @classmethod
    def cosine(cls, eps: float, base: float = 1.0, amplitude: float = 0.3) -> "WallFunction":
        """g = eps (base + amplitude sin^2(pi X)); g' se anula nas extremidades."""
        return cls(
            g=lambda X, e: e * (base + amplitude * np.sin(np.pi * X) ** 2),
            g_x=lambda X, e: e * amplitude * np.pi * np.sin(2.0 * np.pi * X),
            eps=eps,
        )

    @classmethod
    def from_profile(cls, profile: ChannelProfile, eps: float) -> "WallFunction":
        """g = eps sqrt(h); exige h'(0) = h'(1) = 0."""
        return cls(
            g=lambda X, e: e * np.sqrt(profile._evaluate(X)),
            g_x=lambda X, e: e * profile._evaluate_derivative(X) / (2.0 * np.sqrt(profile._evaluate(X))),
            eps=eps,
        )


class Foliation:
    """Extensão H(X, Y, Z) de h_boundary constante ao longo das folhas.

    As folhas são as curvas características dX/dt = -t g'(X)/g(X) partindo
    de (X0, 0); avaliar H em (X, Y, Z) significa achar o X0 cuja folha passa
    por X no raio r = sqrt(Y^2 + Z^2).
    """

    def __init__(self, h_boundary: Callable[[float], float], wall: WallFunction,
                 ode_tol: float = 1e-11, root_tol: float = 1e-13):
        self.h_boundary = h_boundary
        self.wall = wall
        self.ode_tol = ode_tol
        self.root_tol = root_tol

    def _rhs(self, t, X):
        x = np.clip(X[0], 0.0, 1.0)
        return [-t * self.wall.slope(x) / self.wall.radius(x)]

    def leaf(self, X0: float, r: float) -> float:
        """Posição axial psi(r, X0) da folha que parte de X0."""
        if r == 0.0 or X0 in (0.0, 1.0):
            return X0
        sol = integrate.solve_ivp(
            self._rhs, (0.0, r), [X0], method="DOP853",
            rtol=self.ode_tol, atol=self.ode_tol * 1e-2,
        )
        if not sol.success:
            raise RootFindFailure(f"Integração da folha falhou: {sol.message}")
        return float(sol.y[0, -1])

    def base_point(self, X: float, r: float) -> float:
        if r == 0.0 or X in (0.0, 1.0):
            return X
        f = lambda X0: self.leaf(X0, r) - X
        f_low, f_high = f(0.0), f(1.0)
        if f_low * f_high > 0:
            raise RootFindFailure(
                f"Sem mudança de sinal ao procurar a folha de X={X:g}, r={r:g}"
            )
        return brentq(f, 0.0, 1.0, xtol=self.root_tol, rtol=4 * np.finfo(float).eps)

    def __call__(self, X: float, Y: float, Z: float) -> float:
        if not 0.0 <= X <= 1.0:
            raise OutOfDomain("X deve pertencer a [0, 1]")
        r = float(np.hypot(Y, Z))
        return float(self.h_boundary(self.base_point(X, r)))


def build_foliation(h_boundary: Callable[[float], float], wall: WallFunction) -> Foliation:
    return Foliation(h_boundary, wall)


def wall_normal_derivative(foliation: Foliation, X: float, theta: float, delta: float = 1e-4) -> float:
    """Derivada de H na direção normal externa à parede, por diferenças centradas."""
    wall = foliation.wall
    g, gx = wall.radius(X), wall.slope(X)
    point = np.array([X, g * np.cos(theta), g * np.sin(theta)])
    normal = np.array([-gx, np.cos(theta), np.sin(theta)])
    normal /= np.linalg.norm(normal)
    plus = point + delta * normal
    minus = point - delta * normal
    x_plus = min(max(plus[0], 0.0), 1.0)
    x_minus = min(max(minus[0], 0.0), 1.0)
    return (foliation(x_plus, plus[1], plus[2]) - foliation(x_minus, minus[1], minus[2])) / (2.0 * delta)

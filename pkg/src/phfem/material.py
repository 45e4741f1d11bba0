"""Constitutive and inertial coefficients for plates and beams.

The plate law is split into bending and shear parts.  Bending relates the
engineering curvature vector (k_xx, k_yy, k_xy) to the momenta
(M_xx, M_yy, M_xy) through the isotropic rigidity

    D_b = E h^3 / (12 (1 - nu^2)) * [[1, nu, 0], [nu, 1, 0], [0, 0, (1-nu)/2]],

and shear relates (gamma_xz, gamma_yz) to (Q_x, Q_y) through
D_s = k G h I_2 with G = E / (2 (1 + nu)).  The same energy can be written
with symmetric 2x2 tensors; both paths are provided so they can be checked
against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "PlateMaterial",
    "PlateRigidity",
    "BeamMaterial",
    "plate_rigidity",
    "bending_energy_density",
    "bending_energy_density_tensor",
    "curvature_to_tensor",
    "momenta_tensor",
]


@dataclass(frozen=True)
class PlateMaterial:
    """Physical plate parameters (SI units)."""

    E: float
    nu: float
    rho: float
    h: float
    k: float = 5.0 / 6.0

    def __post_init__(self) -> None:
        if self.E <= 0:
            raise ConfigError("Young modulus must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ConfigError("Poisson ratio must lie in [0, 0.5)")
        if self.rho <= 0:
            raise ConfigError("density must be positive")
        if self.h <= 0:
            raise ConfigError("thickness must be positive")
        if not 0.0 < self.k <= 1.0:
            raise ConfigError("shear correction factor must lie in (0, 1]")


@dataclass(frozen=True)
class PlateRigidity:
    """Derived plate coefficients.

    Attributes:
        D_b: 3x3 bending rigidity acting on engineering curvatures, N*m.
        D_s: 2x2 shear rigidity, N/m.
        mu: areal mass rho*h, kg/m^2.
        I_rot: rotary inertia rho*h^3/12, kg.
    """

    D_b: np.ndarray
    D_s: np.ndarray
    mu: float
    I_rot: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "D_b", np.asarray(self.D_b, dtype=float))
        object.__setattr__(self, "D_s", np.asarray(self.D_s, dtype=float))
        self.D_b.setflags(write=False)
        self.D_s.setflags(write=False)

    @property
    def D(self) -> float:
        """Scalar flexural rigidity E h^3 / (12 (1 - nu^2))."""
        return float(self.D_b[0, 0])


@dataclass(frozen=True)
class BeamMaterial:
    """Timoshenko beam coefficients, each a constant or a per-element profile.

    Attributes:
        rhoA: mass per unit length, kg/m.
        Irho: rotary inertia per unit length, kg*m.
        EI: bending stiffness, N*m^2.
        K: shear stiffness, N.
    """

    rhoA: float | np.ndarray
    Irho: float | np.ndarray
    EI: float | np.ndarray
    K: float | np.ndarray

    def __post_init__(self) -> None:
        for name in ("rhoA", "Irho", "EI", "K"):
            value = np.asarray(getattr(self, name), dtype=float)
            if np.any(value <= 0) or not np.all(np.isfinite(value)):
                raise ConfigError(f"beam coefficient {name} must be strictly positive")

    def profile(self, name: str, n_elements: int) -> np.ndarray:
        """Coefficient as a per-element array of length ``n_elements``."""
        if name not in ("rhoA", "Irho", "EI", "K"):
            raise ConfigError(f"unknown beam coefficient {name!r}")
        value = np.asarray(getattr(self, name), dtype=float)
        if value.ndim == 0:
            return np.full(n_elements, float(value))
        if value.shape != (n_elements,):
            raise ConfigError(
                f"beam coefficient {name} has {value.size} entries "
                f"but the mesh has {n_elements} elements"
            )
        return value


def plate_rigidity(mat: PlateMaterial) -> PlateRigidity:
    """Thickness-integrated rigidities and inertias of a homogeneous plate."""
    D = mat.E * mat.h**3 / (12.0 * (1.0 - mat.nu**2))
    D_b = D * np.array(
        [[1.0, mat.nu, 0.0], [mat.nu, 1.0, 0.0], [0.0, 0.0, (1.0 - mat.nu) / 2.0]]
    )
    G = mat.E / (2.0 * (1.0 + mat.nu))
    D_s = mat.k * G * mat.h * np.eye(2)
    return PlateRigidity(D_b, D_s, mat.rho * mat.h, mat.rho * mat.h**3 / 12.0)


def bending_energy_density(rig: PlateRigidity, kappa) -> float:
    """0.5 * kappa^T D_b kappa for an engineering curvature triple."""
    k = np.asarray(kappa, dtype=float)
    return float(0.5 * k @ rig.D_b @ k)


def curvature_to_tensor(kappa) -> np.ndarray:
    """Engineering curvature (k_xx, k_yy, k_xy) as a symmetric 2x2 tensor."""
    k = np.asarray(kappa, dtype=float)
    return np.array([[k[0], 0.5 * k[2]], [0.5 * k[2], k[1]]])


def momenta_tensor(rig: PlateRigidity, K: np.ndarray) -> np.ndarray:
    """Isotropic bending law M = D [(1 - nu) K + nu tr(K) I] on 2x2 tensors."""
    D = rig.D
    nu = float(rig.D_b[0, 1] / D) if D else 0.0
    return D * ((1.0 - nu) * K + nu * np.trace(K) * np.eye(2))


def bending_energy_density_tensor(rig: PlateRigidity, K: np.ndarray) -> float:
    """0.5 * M : K with the tensor contraction Tr(M^T K)."""
    M = momenta_tensor(rig, K)
    return float(0.5 * np.tensordot(M, K))

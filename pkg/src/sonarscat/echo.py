"""Geometric-acoustics echo model for a penetrable object seen from a rail.

The return from an object of diameter D is a train of copies of the source
pulse: one reflection off the near face, then a sequence of internal
reverberations each transmitted back out. Amplitudes follow the fluid
reflection/refraction coefficients and a 1/(x^2 + r^2) spreading loss;
internal peaks are D/c_inside apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signal import Signal, add_noise

WATER = (1503.0, 1000.0)


@dataclass(frozen=True)
class Material:
    speed: float
    density: float

    def __post_init__(self):
        if self.speed <= 0 or self.density <= 0:
            raise ValueError("speed and density must be positive")

    @property
    def impedance(self) -> float:
        return self.density * self.speed


def reflection_refraction(m_out: Material, m_in: Material) -> tuple[float, float]:
    """(V, W) for a wave in ``m_out`` meeting ``m_in``: V = (Z_out - Z_in)/(Z_in + Z_out), W = 1 - V."""
    z_out, z_in = m_out.impedance, m_in.impedance
    v = (z_out - z_in) / (z_in + z_out)
    return v, 1.0 - v


# -- object geometry ----------------------------------------------------------

def _bezier(p0, p1, p2, n):
    t = np.linspace(0.0, 1.0, n, endpoint=False)[:, None]
    p0, p1, p2 = map(np.asarray, (p0, p1, p2))
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2


def _polygon_centroid(v: np.ndarray) -> np.ndarray:
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6 * area)


def _ray_exit(origin, direction, v) -> float:
    """Distance from ``origin`` to the outermost boundary crossing along ``direction``."""
    a, b = v, np.roll(v, -1, axis=0)
    e = b - a
    w = a - origin
    denom = direction[0] * e[:, 1] - direction[1] * e[:, 0]
    ok = np.abs(denom) > 1e-14
    t = np.where(ok, (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / np.where(ok, denom, 1), -1)
    s = np.where(ok, (w[:, 0] * direction[1] - w[:, 1] * direction[0]) / np.where(ok, denom, 1), -1)
    hit = ok & (t > 0) & (s >= 0) & (s <= 1)
    return float(t[hit].max())


def chord_profile(vertices, num_angles: int = 360, mean_diameter: float | None = None):
    """Chord length through the centroid as a function of direction."""
    v = np.asarray(vertices, dtype=np.float64)
    c = _polygon_centroid(v)
    angles = np.linspace(0.0, math.pi, num_angles, endpoint=False)
    chords = []
    for th in angles:
        u = np.array([math.cos(th), math.sin(th)])
        chords.append(_ray_exit(c, u, v) + _ray_exit(c, -u, v))
    chords = np.array(chords)
    if mean_diameter is not None:
        chords *= mean_diameter / chords.mean()
    return DiameterProfile(angles, chords, period=math.pi)


@dataclass(frozen=True)
class DiameterProfile:
    """Periodic piecewise-linear table theta -> D(theta) in meters."""
    angles: np.ndarray
    diameters: np.ndarray
    period: float = 2 * math.pi
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64)
        d = np.asarray(self.diameters, dtype=np.float64)
        if a.shape != d.shape or a.ndim != 1 or a.size < 1:
            raise ValueError("angles and diameters must be equal-length 1-D arrays")
        if np.any(np.diff(a) <= 0):
            raise ValueError("angles must be strictly increasing")
        if np.any(d <= 0):
            raise ValueError("diameters must be positive")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "diameters", d)

    def __call__(self, theta):
        return np.interp(theta, self.angles, self.diameters, period=self.period)

    @property
    def mean(self) -> float:
        th = np.linspace(0, self.period, 4096, endpoint=False)
        return float(np.mean(self(th)))

    def to_dict(self) -> dict:
        if self.name in PROFILES:
            return {"name": self.name}
        return {"angles": self.angles.tolist(), "diameters": self.diameters.tolist(),
                "period": self.period}

    @classmethod
    def from_dict(cls, d: dict) -> "DiameterProfile":
        if "name" in d:
            return named_profile(d["name"])
        return cls(d["angles"], d["diameters"], d.get("period", 2 * math.pi))


def _triangle_vertices():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])


def _shark_fin_vertices(n: int = 48):
    # same base as the triangle; convex leading edge swept back to the apex,
    # concave trailing edge
    apex = (0.9, 0.8)
    lead = _bezier((0.0, 0.0), (0.2, 0.75), apex, n)
    trail = _bezier(apex, (0.8, 0.25), (1.0, 0.0), n)
    return np.vstack([lead, trail])


def _rectangle_vertices():
    return np.array([[0.0, 0.0], [1.5, 0.0], [1.5, 1.0], [0.0, 1.0]])


def _make(name, verts, mean):
    p = chord_profile(verts, mean_diameter=mean)
    return DiameterProfile(p.angles, p.diameters, p.period, name)


PROFILES = {
    "triangle": lambda: _make("triangle", _triangle_vertices(), 1.0),
    "shark_fin": lambda: _make("shark_fin", _shark_fin_vertices(), 1.0),
    "rectangle": lambda: _make("rectangle", _rectangle_vertices(), None),
}


def named_profile(name: str) -> DiameterProfile:
    key = name.replace("-", "_")
    if key not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return PROFILES[key]()


def constant_profile(diameter: float) -> DiameterProfile:
    return DiameterProfile(np.array([0.0]), np.array([float(diameter)]))


# -- scene and peak train -------------------------------------------------------

@dataclass(frozen=True)
class EchoScene:
    inside: Material = Material(2000.0, 1500.0)
    outside: Material = Material(*WATER)
    diameter_profile: DiameterProfile = field(default_factory=lambda: named_profile("triangle"))
    range_x: float = 10.0
    rail_half_length_y: float = 6.0
    rotation_theta: float = 0.0
    num_positions: int = 64
    num_echoes: int = 5

    def __post_init__(self):
        if self.range_x <= 0 or self.rail_half_length_y < 0:
            raise ValueError("range_x must be positive and rail_half_length_y non-negative")
        if self.num_echoes < 1 or self.num_positions < 1:
            raise ValueError("num_echoes and num_positions must be >= 1")

    def rail_positions(self) -> np.ndarray:
        if self.num_positions == 1:
            return np.zeros(1)
        y = self.rail_half_length_y
        return np.linspace(-y, y, self.num_positions)

    def to_dict(self) -> dict:
        return {
            "inside": {"speed": self.inside.speed, "density": self.inside.density},
            "outside": {"speed": self.outside.speed, "density": self.outside.density},
            "diameter_profile": self.diameter_profile.to_dict(),
            "range_x": self.range_x,
            "rail_half_length_y": self.rail_half_length_y,
            "rotation_theta": self.rotation_theta,
            "num_positions": self.num_positions,
            "num_echoes": self.num_echoes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EchoScene":
        d = dict(d)
        kw = {}
        for key in ("inside", "outside"):
            if key in d:
                kw[key] = Material(**d.pop(key))
        if "diameter_profile" in d:
            prof = d.pop("diameter_profile")
            kw["diameter_profile"] = named_profile(prof) if isinstance(prof, str) else DiameterProfile.from_dict(prof)
        unknown = set(d) - {"range_x", "rail_half_length_y", "rotation_theta", "num_positions", "num_echoes"}
        if unknown:
            raise ValueError(f"unknown scene fields: {sorted(unknown)}")
        return cls(**kw, **d)


@dataclass(frozen=True)
class PeakTrain:
    delays: np.ndarray       # seconds
    amplitudes: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.delays) <= 0):
            raise ValueError("peak delays must be strictly increasing")

    def __len__(self):
        return self.delays.size


def first_arrival(scene: EchoScene, r: float, one_way: bool = False) -> float:
    dist = math.hypot(scene.range_x, r)
    return (1.0 if one_way else 2.0) * dist / scene.outside.speed


def effective_angle(scene: EchoScene, r: float) -> float:
    return scene.rotation_theta + math.atan2(r, scene.range_x)


def peak_train(scene: EchoScene, r: float, A0: float = 1.0, one_way: bool = False) -> PeakTrain:
    """Delays and signed amplitudes of the echo seen from rail position ``r``.

    Peak 1 (face reflection): ``V21 A0 / (x^2 + r^2)``.
    Peak n >= 2: ``W21 V12^(n-1) W12 A0 / ((x^2 + r^2) D^(n-1))``, each
    ``D / c_inside`` after its predecessor, with D taken along the line of sight.
    """
    if abs(r) > scene.rail_half_length_y + 1e-12:
        raise ValueError(f"rail position {r} outside [-{scene.rail_half_length_y}, {scene.rail_half_length_y}]")
    v21, w21 = reflection_refraction(scene.outside, scene.inside)
    v12, w12 = reflection_refraction(scene.inside, scene.outside)
    spread = scene.range_x**2 + r**2
    d = float(scene.diameter_profile(effective_angle(scene, r)))
    n = np.arange(1, scene.num_echoes + 1)
    amps = np.empty(n.size)
    amps[0] = v21 * A0 / spread
    k = n[1:] - 1
    amps[1:] = w21 * v12**k * w12 * A0 / (spread * d**k)
    delays = first_arrival(scene, r, one_way) + (n - 1) * d / scene.inside.speed
    return PeakTrain(delays, amps)


def default_pulse(sample_rate: float, center_frequency: float = 2500.0) -> Signal:
    """Negative first derivative of a Gaussian: a positive lobe then a negative lobe.

    Its spectrum peaks at ``center_frequency``; support is truncated at four
    Gaussian widths. ``t0`` is set so time zero is the central zero crossing.
    """
    if sample_rate <= 2 * center_frequency:
        raise ValueError("sample_rate must exceed twice the center frequency")
    s = 1.0 / (2 * math.pi * center_frequency)
    half = int(math.ceil(4 * s * sample_rate))
    t = np.arange(-half, half + 1) / sample_rate
    p = -(t / s) * np.exp(-(t**2) / (2 * s**2))
    return Signal(p / p.max(), sample_rate, t0=float(t[0]))


def render(train: PeakTrain, pulse: Signal, record_length: int) -> np.ndarray:
    """Sum of amplitude-scaled pulse copies at the train's delays.

    Fractional delays are applied as linear phase on the zero-padded record,
    i.e. band-limited interpolation on the circular domain.
    """
    fs = pulse.sample_rate
    if len(pulse) > record_length:
        raise ValueError(f"pulse ({len(pulse)} samples) longer than record ({record_length})")
    end = (train.delays[-1] + pulse.t0) * fs + len(pulse)
    if end > record_length:
        raise ValueError(f"echo ends at sample {end:.1f}, beyond record length {record_length}")
    buf = np.zeros(record_length)
    buf[: len(pulse)] = pulse.samples
    k = np.arange(record_length // 2 + 1)
    shifts = (train.delays + pulse.t0) * fs
    phase = np.exp(-2j * np.pi * np.outer(shifts, k) / record_length)
    spectrum = np.fft.rfft(buf) * (train.amplitudes @ phase)
    return np.fft.irfft(spectrum, n=record_length)


def _position_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(seed), i]).generate_state(1)[0])


def synthesize(scene: EchoScene, pulse: Signal, record_length: int, snr_db: float = math.inf,
               seed: int = 0, A0: float = 1.0, one_way: bool = False, normalize: bool = False,
               reference_energy: float | None = None) -> list[Signal]:
    """One noisy record per rail position, positions evenly spaced on [-y, y].

    ``normalize`` rescales each clean record to unit energy before noise is
    added. ``reference_energy`` sets the SNR reference when the clean record
    can be silent (e.g. matched impedances).
    """
    out = []
    for i, r in enumerate(scene.rail_positions()):
        clean = Signal(render(peak_train(scene, r, A0, one_way), pulse, record_length), pulse.sample_rate)
        energy = clean.energy
        if normalize and energy > 0:
            clean = clean.with_samples(clean.samples / math.sqrt(energy))
        if math.isinf(snr_db):
            out.append(clean)
            continue
        s = _position_seed(seed, i)
        if clean.energy > 0:
            out.append(add_noise(clean, snr_db, s))
        elif reference_energy is not None:
            ref = Signal(np.full(record_length, math.sqrt(reference_energy / record_length)), clean.sample_rate)
            noise = add_noise(ref, snr_db, s).samples - ref.samples
            out.append(clean.with_samples(noise))
        else:
            raise ValueError("silent record: pass reference_energy to set the noise level")
    return out


# -- rail maps ------------------------------------------------------------------

def crossing_ok(x: float, y: float, half_span: float) -> bool:
    """Neighbouring rails at +-half_span share all object angles iff tan(half_span) < y/x."""
    return math.tan(abs(half_span)) < y / x


def rotate_rail_map(x: float, theta_1: float, theta_0: float, q, y: float | None = None,
                    mirror: bool = True):
    """Coordinate on the rotated rail seeing the object at the same angle as ``q``.

    For q >= 0 the target rail is at ``theta_1``. With ``mirror`` the q < 0
    half maps onto the opposite neighbour at 2*theta_0 - theta_1, as used when
    a rail is composed from the two rails bracketing it.
    """
    dtheta = theta_1 - theta_0
    if y is not None and not crossing_ok(x, y, dtheta):
        raise ValueError(f"rails at +-{abs(dtheta):.4g} rad do not cross for x={x}, y={y}")
    q = np.asarray(q, dtype=np.float64)
    sign = np.where(q < 0, -1.0, 1.0) if mirror else 1.0
    out = -x * np.tan(sign * dtheta - np.arctan(q / x))
    return float(out) if out.ndim == 0 else out


def rotation_amplitude_factor(x: float, q, Tq):
    """Far-field amplitude ratio (T(q)^2 + x^2)^(1/4) / (q^2 + x^2)^(1/4)."""
    q, Tq = np.asarray(q, dtype=np.float64), np.asarray(Tq, dtype=np.float64)
    out = ((Tq**2 + x**2) / (q**2 + x**2)) ** 0.25
    return float(out) if out.ndim == 0 else out


def translate_rail_map(x1: float, x2: float, r):
    """Point on the nearer rail (range x1) at the same angle as ``r`` on the rail at x2."""
    if not x2 >= x1 > 0:
        raise ValueError("need x2 >= x1 > 0")
    out = np.asarray(r, dtype=np.float64) * (x1 / x2)
    return float(out) if out.ndim == 0 else out


def phase_shift_h(x: float, q, Tq, c2: float):
    """Time shift -(1/c2) (sqrt(q^2 + x^2) - sqrt(T(q)^2 + x^2)) in seconds."""
    if c2 <= 0:
        raise ValueError("c2 must be positive")
    q, Tq = np.asarray(q, dtype=np.float64), np.asarray(Tq, dtype=np.float64)
    out = -(np.hypot(q, x) - np.hypot(Tq, x)) / c2
    return float(out) if out.ndim == 0 else out

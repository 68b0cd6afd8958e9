"""Forward splatting of a composed scene into RGB, depth, and alpha images.

Projection follows the standard perspective-affine approximation: the world
covariance is pushed through the camera rotation and the projection Jacobian,
then floored on the diagonal so every splat covers at least a fragment of a
pixel.  Compositing is front-to-back alpha blending over splats sorted by
camera depth, ties broken by position in the composed scene.

Two compositors are provided: `render` rasterizes tile by tile with per-pixel
saturation cutoff (the production path), and `render_reference` is a
deliberately simple global-sort full-frame compositor kept as an oracle for
the tile scheduler.  Both apply the identical per-pixel alpha rule, so their
outputs agree to floating-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene_model import CameraPose, Gaussian, GaussianSet, quaternions_to_matrices
from .temporal import ComposedScene, modulate_opacities

# Screen-space covariance diagonal floor (px^2), after EWA projection.
COV_FLOOR = 0.3
# Per-contribution alpha ceiling; keeps (1 - alpha) bounded away from zero.
ALPHA_CEIL = 0.99


@dataclass(frozen=True)
class RenderSettings:
    """Rasterizer knobs; defaults match the engine's acceptance tolerances."""

    tile_size: int = 16
    alpha_threshold: float = 1.0 / 255.0     # contributions below this are dropped
    saturation_threshold: float = 1.0e-4     # stop a pixel once transmittance falls below
    near_clip: float = 0.2                   # meters
    far_clip: float = 2000.0                 # meters
    gaussian_extent: float = 3.0             # Mahalanobis cutoff, in stddevs
    frustum_margin: float = 0.3              # center cull beyond this fraction off-frame


@dataclass(frozen=True)
class RenderDiagnostics:
    culled_depth: int = 0          # outside (near, far)
    culled_frustum: int = 0        # center projects too far off-frame
    culled_opacity: int = 0        # modulated opacity below alpha_threshold
    degenerate_skipped: int = 0    # non-invertible 2D covariance
    drawn: int = 0                 # splats that reached compositing


@dataclass(frozen=True)
class RenderTarget:
    """Float images produced by one render: rgb in [0, 1], depth in meters,
    alpha = 1 - final transmittance."""

    width: int
    height: int
    rgb: np.ndarray        # (H, W, 3) float64
    depth: np.ndarray      # (H, W) float64, 0 where nothing rendered
    alpha: np.ndarray      # (H, W) float64
    diagnostics: RenderDiagnostics = field(default_factory=RenderDiagnostics)


@dataclass(frozen=True)
class Splat2D:
    """A projected Gaussian ready for compositing."""

    center: np.ndarray     # (2,) pixel (u, v)
    cov: np.ndarray        # (2, 2) screen covariance, floor applied
    conic: np.ndarray      # (3,) upper-triangular inverse (A, B, C)
    depth: float
    opacity: float         # lifespan-modulated
    color: np.ndarray      # (3,)
    radius: float          # extent cutoff bounding radius, px
    index: int             # position in the source scene (tie-break key)


class _Projected:
    """Arrays for the splats that survived culling, in scene order."""

    __slots__ = ("centers", "conics", "depths", "opacities", "colors",
                 "radii", "covs", "indices", "diagnostics")

    def __init__(self, centers, conics, depths, opacities, colors, radii, covs, indices, diagnostics):
        self.centers = centers
        self.conics = conics
        self.depths = depths
        self.opacities = opacities
        self.colors = colors
        self.radii = radii
        self.covs = covs
        self.indices = indices
        self.diagnostics = diagnostics

    def __len__(self) -> int:
        return len(self.depths)


def _project_batch(
    gaussians: GaussianSet,
    query_time: float,
    pose: CameraPose,
    settings: RenderSettings,
    frame: tuple[int, int] | None = None,
) -> _Projected:
    n = len(gaussians)
    if n == 0:
        z = np.zeros
        return _Projected(z((0, 2)), z((0, 3)), z(0), z(0), z((0, 3)), z(0),
                          z((0, 2, 2)), z(0, dtype=np.int64), RenderDiagnostics())

    cam = pose.world_to_camera(gaussians.means.astype(np.float64))
    z = cam[:, 2]
    in_depth = (z > settings.near_clip) & (z < settings.far_clip)
    culled_depth = int(n - np.count_nonzero(in_depth))

    opac = modulate_opacities(
        gaussians.opacities, gaussians.lifespans, gaussians.birth_times, query_time
    )
    visible = opac >= settings.alpha_threshold
    culled_opacity = int(np.count_nonzero(in_depth & ~visible))

    alive = in_depth & visible
    culled_frustum = 0
    if frame is not None:
        # The local-affine projection is only trustworthy near the image;
        # a large splat grazing the camera plane would otherwise smear a
        # near-degenerate ellipse across the whole frame.
        width, height = frame
        uv = pose.pixel_from_camera(cam)
        mx, my = settings.frustum_margin * width, settings.frustum_margin * height
        in_frame = (
            (uv[:, 0] >= -mx) & (uv[:, 0] <= width - 1 + mx)
            & (uv[:, 1] >= -my) & (uv[:, 1] <= height - 1 + my)
        )
        culled_frustum = int(np.count_nonzero(alive & ~in_frame))
        alive &= in_frame

    keep = np.nonzero(alive)[0]
    cam = cam[keep]
    z = z[keep]
    opac = opac[keep]

    # world covariance R diag(s^2) R^T, rotated into the camera frame
    rot = quaternions_to_matrices(gaussians.rotations[keep].astype(np.float64))
    s2 = gaussians.scales[keep].astype(np.float64) ** 2
    cov_world = np.einsum("nij,nj,nkj->nik", rot, s2, rot)
    w_mat = pose.rotation_matrix().T                      # world -> camera
    cov_cam = np.einsum("ij,njk,lk->nil", w_mat, cov_world, w_mat)

    # perspective Jacobian rows at the splat center
    x, y = cam[:, 0], cam[:, 1]
    j0 = np.stack([pose.fx / z, np.zeros_like(z), -pose.fx * x / (z * z)], axis=1)
    j1 = np.stack([np.zeros_like(z), pose.fy / z, -pose.fy * y / (z * z)], axis=1)
    a = np.einsum("ni,nij,nj->n", j0, cov_cam, j0) + COV_FLOOR
    b = np.einsum("ni,nij,nj->n", j0, cov_cam, j1)
    c = np.einsum("ni,nij,nj->n", j1, cov_cam, j1) + COV_FLOOR

    det = a * c - b * b
    ok = np.isfinite(det) & (det > 0.0) & np.isfinite(a) & np.isfinite(b) & np.isfinite(c)
    degenerate = int(np.count_nonzero(~ok))
    keep2 = np.nonzero(ok)[0]
    a, b, c, det, z, opac = a[keep2], b[keep2], c[keep2], det[keep2], z[keep2], opac[keep2]
    cam = cam[keep2]

    conics = np.stack([c / det, -b / det, a / det], axis=1)
    centers = pose.pixel_from_camera(cam)
    lam_max = 0.5 * (a + c) + 0.5 * np.sqrt((a - c) ** 2 + 4.0 * b * b)
    radii = settings.gaussian_extent * np.sqrt(lam_max)
    covs = np.empty((len(a), 2, 2))
    covs[:, 0, 0], covs[:, 0, 1] = a, b
    covs[:, 1, 0], covs[:, 1, 1] = b, c

    return _Projected(
        centers=centers,
        conics=conics,
        depths=z,
        opacities=opac,
        colors=gaussians.colors[keep][keep2].astype(np.float64),
        radii=radii,
        covs=covs,
        indices=keep[keep2].astype(np.int64),
        diagnostics=RenderDiagnostics(
            culled_depth=culled_depth,
            culled_frustum=culled_frustum,
            culled_opacity=culled_opacity,
            degenerate_skipped=degenerate,
            drawn=len(keep2),
        ),
    )


def project_gaussian(
    g: Gaussian,
    pose: CameraPose,
    query_time: float,
    settings: RenderSettings = RenderSettings(),
    frame: tuple[int, int] | None = None,
) -> Splat2D | None:
    """Project a single Gaussian; None when culled or degenerate.

    Culling reasons: camera depth outside (near_clip, far_clip), modulated
    opacity below alpha_threshold, a non-invertible screen covariance, or
    (when ``frame`` gives the image size) a center beyond the frustum margin.
    """
    single = GaussianSet(
        colors=g.color[None, :], means=g.mean[None, :], rotations=g.rotation[None, :],
        scales=g.scale[None, :], opacities=np.array([g.opacity]),
        lifespans=np.array([g.lifespan]), birth_times=np.array([g.birth_time]),
    )
    p = _project_batch(single, query_time, pose, settings, frame=frame)
    if len(p) == 0:
        return None
    return Splat2D(
        center=p.centers[0], cov=p.covs[0], conic=p.conics[0],
        depth=float(p.depths[0]), opacity=float(p.opacities[0]),
        color=p.colors[0], radius=float(p.radii[0]), index=0,
    )


def _depth_order(p: _Projected) -> np.ndarray:
    """Front-to-back order; equal depths keep scene (provenance) order."""
    return np.lexsort((p.indices, p.depths))


def _pixel_bounds(p: _Projected, width: int, height: int):
    """Inclusive pixel-index bounds of each splat's cutoff disc, clipped."""
    x0 = np.ceil(p.centers[:, 0] - p.radii).astype(np.int64)
    x1 = np.floor(p.centers[:, 0] + p.radii).astype(np.int64)
    y0 = np.ceil(p.centers[:, 1] - p.radii).astype(np.int64)
    y1 = np.floor(p.centers[:, 1] + p.radii).astype(np.int64)
    np.clip(x0, 0, width - 1, out=x0)
    np.clip(x1, 0, width - 1, out=x1)
    np.clip(y0, 0, height - 1, out=y0)
    np.clip(y1, 0, height - 1, out=y1)
    onscreen = (
        (p.centers[:, 0] + p.radii >= 0) & (p.centers[:, 0] - p.radii <= width - 1)
        & (p.centers[:, 1] + p.radii >= 0) & (p.centers[:, 1] - p.radii <= height - 1)
    )
    return x0, x1, y0, y1, onscreen


def _shifted_cumprod(a: np.ndarray) -> np.ndarray:
    """Exclusive cumulative product along axis 0."""
    out = np.empty_like(a)
    out[0] = 1.0
    if len(a) > 1:
        np.cumprod(a[:-1], axis=0, out=out[1:])
    return out


def _composite_span(
    px: np.ndarray, py: np.ndarray,
    centers, conics, colors, depths, opacities,
    settings: RenderSettings,
    trans: np.ndarray, rgb: np.ndarray, dep: np.ndarray, acc: np.ndarray,
    chunk: int = 512,
):
    """Front-to-back blend of an ordered splat run over a flat pixel block.

    All accumulator arrays are updated in place.  A pixel stops accepting
    contributions once its transmittance drops below the saturation threshold
    (the transmittance freezes there, matching a per-pixel early exit).
    """
    extent2 = settings.gaussian_extent ** 2
    for lo in range(0, len(depths), chunk):
        if not np.any(trans >= settings.saturation_threshold):
            break
        hi = min(lo + chunk, len(depths))
        dx = centers[lo:hi, 0, None] - px[None, :]
        dy = centers[lo:hi, 1, None] - py[None, :]
        co = conics[lo:hi]
        mahal = co[:, 0, None] * dx * dx + 2.0 * co[:, 1, None] * dx * dy + co[:, 2, None] * dy * dy
        alpha = np.minimum(ALPHA_CEIL, opacities[lo:hi, None] * np.exp(-0.5 * mahal))
        include = (mahal <= extent2) & (alpha >= settings.alpha_threshold)
        eff = np.where(include, alpha, 0.0)
        # transmittance in front of each splat; once it crosses the
        # saturation threshold it only shrinks, so the first crossing
        # permanently freezes the pixel
        chain = trans[None, :] * _shifted_cumprod(1.0 - eff)
        eff = np.where(chain >= settings.saturation_threshold, eff, 0.0)
        chain = trans[None, :] * _shifted_cumprod(1.0 - eff)
        w = eff * chain
        rgb += np.einsum("kp,kc->pc", w, colors[lo:hi])
        dep += depths[lo:hi] @ w
        acc += np.sum(w, axis=0)
        trans *= np.prod(1.0 - eff, axis=0)


def _finalize(width, height, rgb, dep, acc, trans, diagnostics) -> RenderTarget:
    depth = np.zeros_like(dep)
    np.divide(dep, acc, out=depth, where=acc > 0)
    return RenderTarget(
        width=width, height=height,
        rgb=rgb.reshape(height, width, 3),
        depth=depth.reshape(height, width),
        alpha=(1.0 - trans).reshape(height, width),
        diagnostics=diagnostics,
    )


def render(
    scene: ComposedScene,
    pose: CameraPose,
    width: int,
    height: int,
    settings: RenderSettings = RenderSettings(),
) -> RenderTarget:
    """Tile-based rasterization of a composed scene.

    Splats are binned into tile_size^2 tiles by their cutoff disc, each tile
    composites its splats front to back, and saturated pixels stop early.
    Every tile owns a disjoint region of the output, so tiles are independent
    of one another.
    """
    p = _project_batch(scene.gaussians, scene.query_time, pose, settings,
                       frame=(width, height))
    order = _depth_order(p)
    x0, x1, y0, y1, onscreen = _pixel_bounds(p, width, height)

    rgb = np.zeros((height * width, 3))
    dep = np.zeros(height * width)
    acc = np.zeros(height * width)
    trans = np.ones(height * width)

    ts = settings.tile_size
    drawable = order[onscreen[order]]
    for ty0 in range(0, height, ts):
        ty1 = min(ty0 + ts, height)
        row = drawable[(y0[drawable] < ty1) & (y1[drawable] >= ty0)]
        if not len(row):
            continue
        for tx0 in range(0, width, ts):
            tx1 = min(tx0 + ts, width)
            sel = row[(x0[row] < tx1) & (x1[row] >= tx0)]
            if not len(sel):
                continue
            cols = np.arange(tx0, tx1)
            rows = np.arange(ty0, ty1)
            px = np.tile(cols, len(rows)).astype(np.float64)
            py = np.repeat(rows, len(cols)).astype(np.float64)
            flat = (np.repeat(rows, len(cols)) * width + np.tile(cols, len(rows)))
            block_rgb = rgb[flat]
            block_dep = dep[flat]
            block_acc = acc[flat]
            block_tr = trans[flat]
            _composite_span(
                px, py,
                p.centers[sel], p.conics[sel], p.colors[sel], p.depths[sel], p.opacities[sel],
                settings, block_tr, block_rgb, block_dep, block_acc,
            )
            rgb[flat] = block_rgb
            dep[flat] = block_dep
            acc[flat] = block_acc
            trans[flat] = block_tr

    return _finalize(width, height, rgb, dep, acc, trans, p.diagnostics)


def render_reference(
    scene: ComposedScene,
    pose: CameraPose,
    width: int,
    height: int,
    settings: RenderSettings = RenderSettings(),
) -> RenderTarget:
    """Brute-force compositor: one global depth sort, every splat evaluated
    against every pixel, no tiles and no footprint bounds.

    Kept intentionally simple; the tiled renderer is tested against it.
    """
    p = _project_batch(scene.gaussians, scene.query_time, pose, settings,
                       frame=(width, height))
    order = _depth_order(p)

    ys, xs = np.mgrid[0:height, 0:width]
    xs = xs.astype(np.float64).ravel()
    ys = ys.astype(np.float64).ravel()
    rgb = np.zeros((height * width, 3))
    dep = np.zeros(height * width)
    acc = np.zeros(height * width)
    trans = np.ones(height * width)
    extent2 = settings.gaussian_extent ** 2

    for k in order:
        live = trans >= settings.saturation_threshold
        if not np.any(live):
            break
        dx = xs - p.centers[k, 0]
        dy = ys - p.centers[k, 1]
        ca, cb, cc = p.conics[k]
        mahal = ca * dx * dx + 2.0 * cb * dx * dy + cc * dy * dy
        alpha = np.minimum(ALPHA_CEIL, p.opacities[k] * np.exp(-0.5 * mahal))
        hit = live & (mahal <= extent2) & (alpha >= settings.alpha_threshold)
        if not np.any(hit):
            continue
        w = np.where(hit, alpha * trans, 0.0)
        rgb += w[:, None] * p.colors[k]
        dep += w * p.depths[k]
        acc += w
        trans = np.where(hit, trans * (1.0 - alpha), trans)

    return _finalize(width, height, rgb, dep, acc, trans, p.diagnostics)


def render_sky_mask(target: RenderTarget, threshold: float = 0.5) -> np.ndarray:
    """Boolean (H, W) sky mask: pixels whose alpha stayed below threshold."""
    return target.alpha < threshold

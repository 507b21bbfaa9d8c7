import numpy as np
import pytest

from dockwave import dtn, geometry, mesh as meshmod
from dockwave.swe import PhysParams


@pytest.fixture(scope="session")
def unit_params():
    return PhysParams(gravity=1.0, depth_ref=1.0, density=1000.0)


@pytest.fixture(scope="session")
def flat_unit_bathy():
    return dtn.InteriorBathymetry.constant(1.0)


@pytest.fixture(scope="session")
def circle_scene(unit_params, flat_unit_bathy):
    """Circle obstacle, 64 x 128 annulus out to r = 4, spectral operator."""
    curve = geometry.build_curve(geometry.circle(1.0), 128)
    mesh = meshmod.build_mesh(curve, n_r=64, r_out=4.0)
    op = dtn.assemble_dtn(flat_unit_bathy, curve, solver="spectral")
    return {"curve": curve, "mesh": mesh, "dtn": op,
            "params": unit_params, "bathy": flat_unit_bathy}


def gaussian_zeta(mesh, amp=0.04, sigma=0.8, center=(2.5, 0.0)):
    x = mesh.centers[..., 0]
    y = mesh.centers[..., 1]
    return amp * np.exp(-((x - center[0]) ** 2 + (y - center[1]) ** 2)
                        / (2 * sigma ** 2))

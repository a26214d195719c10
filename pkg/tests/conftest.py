import numpy as np
import pytest

from splineseg import MeshParams, PhantomSpec, VoxelVolume, generate_phantom


def digital_ball(radius_vox: float, dims=(32, 32, 32), spacing=(1.0, 1.0, 1.0),
                 center=None) -> VoxelVolume:
    nx, ny, nz = dims
    if center is None:
        center = ((nx / 2) * spacing[0], (ny / 2) * spacing[1], (nz / 2) * spacing[2])
    x = (np.arange(nx) + 0.5) * spacing[0] - center[0]
    y = (np.arange(ny) + 0.5) * spacing[1] - center[1]
    z = (np.arange(nz) + 0.5) * spacing[2] - center[2]
    r2 = (x[None, None, :] ** 2 + y[None, :, None] ** 2 + z[:, None, None] ** 2)
    return VoxelVolume(dims, spacing, (r2 <= radius_vox ** 2).astype(np.float32), "mask")


@pytest.fixture(scope="session")
def ball_phantom():
    spec = PhantomSpec(shape="sphere", radii=(10.0, 10.0, 10.0),
                       blur_sigma=1.0, noise_sigma=0.05, seed=11)
    return generate_phantom(spec)


@pytest.fixture(scope="session")
def sharp_ball_phantom():
    spec = PhantomSpec(shape="sphere", radii=(10.0, 10.0, 10.0),
                       blur_sigma=0.0, noise_sigma=0.0, seed=3)
    return generate_phantom(spec)


@pytest.fixture(scope="session")
def lobed_phantom():
    spec = PhantomSpec(shape="lobed-blob", radii=(12.0, 12.0, 14.0),
                       lobe_amplitude=0.15, blur_sigma=1.0, noise_sigma=0.05, seed=5)
    return generate_phantom(spec)


@pytest.fixture(scope="session")
def default_mesh():
    return MeshParams(12, 16, 0)

"""The two built-in sensor rigs.

TaxiSim mimics a passenger-car layout: one tall 360-degree top LiDAR plus
four low corner units that fill near-field blind spots. BusSim mimics a bus:
no top unit; front/rear center LiDARs and two front-corner units mounted on
a large box body that shadows the area behind each sensor. The body shadowing
(rays into the ego body are dropped) is what creates the per-rig coverage
pattern and hence the configuration domain gap.
"""

from .types import Box3D, LidarMount, ObjectClass, SensorRig

MAX_RANGE = 70.0
RANGE_NOISE_SIGMA = 0.02
AZIMUTH_STEPS = 360


def _mount(origin, beams, elev, azimuth_steps, noise_sigma):
    return LidarMount(
        origin=origin,
        beams=beams,
        elevation_range=elev,
        azimuth_steps=azimuth_steps,
        max_range=MAX_RANGE,
        range_noise_sigma=noise_sigma,
    )


def taxisim(azimuth_steps: int = AZIMUTH_STEPS,
            noise_sigma: float = RANGE_NOISE_SIGMA) -> SensorRig:
    """Passenger-car rig: 32-beam top unit + four 8-beam corner units."""
    mounts = [_mount((0.0, 0.0, 2.0), 32, (-30.0, 10.0), azimuth_steps, noise_sigma)]
    for sx in (1.0, -1.0):
        for sy in (0.8, -0.8):
            mounts.append(_mount((sx, sy, 0.6), 8, (-70.0, 0.0),
                                 azimuth_steps, noise_sigma))
    # Body narrow enough that the corner units sit outside it.
    body = Box3D(center=(0.0, 0.0, 0.6), size=(4.5, 1.5, 1.2), yaw=0.0,
                 cls=ObjectClass.Car)
    return SensorRig(name="TaxiSim", mounts=tuple(mounts), ego_body=body)


def bussim(azimuth_steps: int = AZIMUTH_STEPS,
           noise_sigma: float = RANGE_NOISE_SIGMA) -> SensorRig:
    """Bus rig: four 16-beam units at the front, rear, and front corners."""
    mounts = (
        _mount((4.0, 0.0, 2.8), 16, (-30.0, 10.0), azimuth_steps, noise_sigma),
        _mount((-4.0, 0.0, 2.8), 16, (-30.0, 10.0), azimuth_steps, noise_sigma),
        _mount((4.0, 1.2, 2.2), 16, (-70.0, 0.0), azimuth_steps, noise_sigma),
        _mount((4.0, -1.2, 2.2), 16, (-70.0, 0.0), azimuth_steps, noise_sigma),
    )
    body = Box3D(center=(0.0, 0.0, 1.5), size=(8.0, 2.5, 3.0), yaw=0.0,
                 cls=ObjectClass.Bus)
    return SensorRig(name="BusSim", mounts=mounts, ego_body=body)


RIG_FACTORIES = {"taxisim": taxisim, "bussim": bussim}


def make_rig(name: str, azimuth_steps: int = AZIMUTH_STEPS,
             noise_sigma: float = RANGE_NOISE_SIGMA) -> SensorRig:
    key = name.lower()
    if key not in RIG_FACTORIES:
        raise ValueError(f"unknown rig {name!r}; expected one of {sorted(RIG_FACTORIES)}")
    return RIG_FACTORIES[key](azimuth_steps, noise_sigma)

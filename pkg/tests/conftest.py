import math

import pytest

from uamsim.hexspace import AirspaceNetwork, HexRegion, RegionId, build_network

SQRT3 = math.sqrt(3.0)


def flower_network(circumradius: float = 250.0, altitude: float = 500.0,
                   n_cr: float = 10.0) -> AirspaceNetwork:
    """Seven-cell network: the origin cell plus its six neighbors, nothing else."""
    from uamsim.hexspace import HEX_DIRECTIONS, axial_to_xy

    regions = {}
    for q, r in ((0, 0),) + HEX_DIRECTIONS:
        cx, cy = axial_to_xy(q, r, circumradius)
        rid = RegionId(0, q, r)
        regions[rid] = HexRegion(id=rid, centroid=(cx, cy, altitude),
                                 circumradius=circumradius, n_cr=n_cr,
                                 v_max_region=20.0)
    half = 2.0 * circumradius
    return AirspaceNetwork(layer_altitudes=[altitude], circumradius=circumradius,
                           bounds=(-half, -half, half, half),
                           regions=regions, tubes=[])


@pytest.fixture
def single_layer():
    return build_network([500.0], 250.0, (-2000.0, -2000.0, 2000.0, 2000.0))


@pytest.fixture
def two_layer():
    return build_network([400.0, 600.0], 250.0, (-2000.0, -2000.0, 2000.0, 2000.0),
                         tubes=[(0, 0, 0), (2, -1, 0)])

from .citygml import citygml_tree, write_citygml
from .dem import DEM, ground_elevation, read_dem, terrain_curve, write_dem
from .model import (
    DEFAULT_WALL_HEIGHT, BuildingModel, SemanticSurface, SurfaceLabel, assemble, edge_multiplicity,
    eave_z, footprint_xy, is_watertight, signed_volume, world_vertices,
)
from .params import ParamsRecord, params_dict, read_params_json, record_from_dict, write_params_json

__all__ = [
    "DEFAULT_WALL_HEIGHT", "DEM", "BuildingModel", "ParamsRecord", "SemanticSurface", "SurfaceLabel",
    "assemble", "citygml_tree", "eave_z", "edge_multiplicity", "footprint_xy", "ground_elevation",
    "is_watertight", "params_dict", "read_dem", "read_params_json", "record_from_dict", "signed_volume",
    "terrain_curve", "world_vertices", "write_citygml", "write_dem", "write_params_json",
]

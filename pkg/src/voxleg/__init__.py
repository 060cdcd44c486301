"""Evolution of environment-specific voxelized hexapod tibia morphologies.

Two interchangeable genotype representations decode into a shared voxel-grid
phenotype: a direct encoding built from 3D Bezier splines evolved with a
genetic algorithm, and an indirect CPPN encoding evolved with NEAT.  Decoded
legs are scored by a surrogate resistive-medium torque model and can be
exported as printable STL/OBJ meshes.
"""

from voxleg.voxels import GridDims, VoxelGrid

__all__ = ["GridDims", "VoxelGrid"]
__version__ = "0.1.0"

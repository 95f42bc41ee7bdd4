"""
Bin-Picking Digital Twin
------------------------

Geometric bin-picking planning stack driven by a deterministic simulator.

Packages:
- geometry: rotations, rigid transforms, rotation/translation averaging
- mesh: STL/OBJ ingestion, BVH ray casting, sampling, mesh intersection
- perception: simulated depth camera, pose-estimate emulator, rejection filter
- tracking: symmetry-aware temporal pose buffer
- scene: voxel carving and the planner's world model
- grasping: offline antipodal grasp database and online planning
- simulation: bin generation, viewpoints, execution, masked time, metrics
"""

__version__ = '1.0.0'

# Copyright 2026 The cblseg Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Boundary-aware point cloud segmentation metrics and contrastive boundary learning."""

from ._core import (
    InputError,
    NeighborhoodIndex,
    PointCloud,
    RuntimeFailure,
    SamplingHierarchy,
    SegNet,
    __version__,
    build_hierarchy,
    cbl_loss,
    evaluate,
    extract_boundary,
    generate_scene,
    generate_split,
    gradcheck_cbl,
    metrics,
    mine_stage_boundaries,
    read_cloud,
    soft_vs_hard_divergence,
    train,
    write_cloud,
)

__all__ = [
    "InputError",
    "NeighborhoodIndex",
    "PointCloud",
    "RuntimeFailure",
    "SamplingHierarchy",
    "SegNet",
    "__version__",
    "build_hierarchy",
    "cbl_loss",
    "evaluate",
    "extract_boundary",
    "generate_scene",
    "generate_split",
    "gradcheck_cbl",
    "metrics",
    "mine_stage_boundaries",
    "read_cloud",
    "soft_vs_hard_divergence",
    "train",
    "write_cloud",
]

from .tracer import TriScene, build_scene, raycast, occluded, render_hits
from .render import RenderOutput, trace_scene, build_scene_bvh, trace_object_mask
from .annotations import (AnnotationRecord, annotate_frame,
                          compute_visibility, pnp_verify)
from .dataset import (DatasetManifest, FrameRecord, read_dataset,
                      read_frame_images, write_dataset)

__all__ = [
    "TriScene", "build_scene", "raycast", "occluded", "render_hits",
    "RenderOutput", "trace_scene", "build_scene_bvh", "trace_object_mask",
    "AnnotationRecord", "annotate_frame", "compute_visibility", "pnp_verify",
    "DatasetManifest", "FrameRecord", "read_dataset", "read_frame_images",
    "write_dataset",
]

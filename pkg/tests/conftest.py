import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gesturebench import descriptors, masks, synth
from gesturebench.classify import LabeledBundle
from gesturebench.dataset import LabeledMask


def render_dataset(cfg):
    """In-memory synthetic dataset: rendered, normalized, labeled masks."""
    out = []
    ncfg = masks.NormalizationConfig()
    for ci, spec in enumerate(synth.default_specs(cfg.classes)):
        for ii in range(cfg.per_class):
            rng = synth._instance_rng(cfg.seed, ci, ii)
            grid, wrist = synth.render_instance(spec, cfg, rng)
            image_id = f"{spec.class_id}_i{ii:03d}"
            nmask = masks.normalize(masks.BinaryMask(grid), wrist, ncfg,
                                    source_id=image_id)
            out.append(LabeledMask(image_id=image_id, label=spec.class_id,
                                   nmask=nmask))
    return out


def bundle_dataset_items(labeled_masks, threads=1):
    bundles = descriptors.build_bundles([lm.nmask for lm in labeled_masks],
                                        threads=threads)
    return [LabeledBundle(lm.image_id, lm.label, b)
            for lm, b in zip(labeled_masks, bundles)]


@pytest.fixture(scope="session")
def small_masks():
    return render_dataset(synth.SynthConfig(classes=6, per_class=5, seed=11))


@pytest.fixture(scope="session")
def small_bundles(small_masks):
    return bundle_dataset_items(small_masks)

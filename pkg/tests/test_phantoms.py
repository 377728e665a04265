import dataclasses
import warnings

import numpy as np
import pytest

from baytomo.phantoms import (CoreMaterials, LogMaterials, PhantomSpec, make_drillcore_phantom,
                              make_log_phantom, make_phantom, metal_mask, pixel_centers)
from baytomo.volume import stack


def test_plain_log_has_two_values():
    img = make_log_phantom(PhantomSpec(n_knots=0, rot=False, metal=False))
    assert set(np.unique(img.values)) == {0.0, 1.0}


def test_log_deterministic():
    a = make_log_phantom(PhantomSpec(seed=4))
    b = make_log_phantom(PhantomSpec(seed=4))
    assert a.values.tobytes() == b.values.tobytes()
    assert a.values.tobytes() != make_log_phantom(PhantomSpec(seed=5)).values.tobytes()


def test_default_log_plateaus_and_metal_max():
    spec = PhantomSpec()
    X = make_log_phantom(spec).as_array()
    lm = spec.log_materials
    plateaus = [v for v in (lm.background, lm.wood, lm.rot, lm.knot, lm.metal) if np.any(X == v)]
    assert len(plateaus) >= 4
    assert X.max() == lm.metal
    assert np.all(metal_mask(spec)[X == X.max()])


def test_values_bounded_and_nonnegative():
    for spec in (PhantomSpec(), PhantomSpec(kind="drill_core"), PhantomSpec(side=33, seed=9)):
        X = make_phantom(spec).values
        assert X.min() >= 0 and X.max() <= spec.max_value


def test_material_table_ordering():
    lm = LogMaterials()
    assert lm.metal > lm.knot > lm.wood > lm.rot > lm.background
    cm = CoreMaterials()
    assert cm.pore < cm.matrix < cm.cob


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(kind="brain")
    with pytest.raises(ValueError):
        PhantomSpec(log_materials=LogMaterials(knot=1.0))
    with pytest.raises(ValueError):
        PhantomSpec(core_materials=CoreMaterials(pore=-0.1))
    with pytest.raises(ValueError):
        make_log_phantom(PhantomSpec(kind="drill_core"))


def test_plain_core_has_two_values():
    img = make_drillcore_phantom(PhantomSpec(kind="drill_core", n_pores=0, n_cobs=0))
    assert set(np.unique(img.values)) == {0.0, 1.0}


def test_core_deterministic_and_features_inside_disk():
    spec = PhantomSpec(kind="drill_core", seed=2)
    a, b = make_drillcore_phantom(spec), make_drillcore_phantom(spec)
    assert a.values.tobytes() == b.values.tobytes()
    X = a.as_array()
    U, V = pixel_centers(spec.side)
    cm = spec.core_materials
    inside = U**2 + V**2 <= spec.core_radius**2
    assert np.any(X == cm.pore) and np.any(X == cm.cob)
    assert np.all(inside[(X == cm.pore) | (X == cm.cob)])


def test_core_warns_when_overfull():
    spec = PhantomSpec(kind="drill_core", n_pores=20, pore_radius=(0.15, 0.16), n_cobs=0, side=32)
    with pytest.warns(UserWarning):
        make_drillcore_phantom(spec)


def test_volume_metal_stays_in_prism():
    spec = PhantomSpec()
    vol = make_log_phantom(spec, n_slices=16)
    assert vol.shape == (16, 64, 64)
    box = metal_mask(spec)
    for s in vol.slices:
        X = s.as_array()
        assert np.all(box[X == X.max()])
    # knots move between slices
    assert vol.slices[0].values.tobytes() != vol.slices[-1].values.tobytes()


def test_stack_roundtrip():
    img = make_log_phantom(PhantomSpec(side=16))
    vol = stack([img, img], 0.5)
    assert all(np.array_equal(s.values, img.values) for s in vol.unstack())
    with pytest.raises(ValueError):
        stack([img])
    with pytest.raises(ValueError):
        stack([img, make_log_phantom(PhantomSpec(side=8))])

"""Tests for feature and assay ingestion, splits and synthetic fixtures."""

import json

import numpy as np
import pytest

from hyperscreen.data import (
    FeatureStore,
    decode_features,
    encode_features,
    generate_cliff_pairs,
    generate_synthetic,
    load_assays,
    load_cliff_manifest,
    load_features,
    parse_assays,
    split_assays,
    split_counts,
    validate_references,
    write_assays,
    write_cliff_manifest,
    write_features,
)
from hyperscreen.errors import ConfigError, DataError, FormatError
from hyperscreen.models import CliffPairSpec

HEADER = json.dumps({"format": "hypseek-assays", "version": 1, "affinity_orientation": "higher_stronger"})


def assay_line(assay_id="a1", target_id="t1", ligands=None):
    record = {
        "assay_id": assay_id,
        "target_id": target_id,
        "pocket_feature_ids": ["p1"],
        "ligands": ligands
        if ligands is not None
        else [
            {"ligand_id": "x", "feature_id": "x", "active": True, "affinity": 7.0},
            {"ligand_id": "y", "feature_id": "y", "active": False, "affinity": 5.0},
        ],
    }
    return json.dumps(record)


def test_feature_store_rejects_duplicates():
    """Test duplicate ids are a data error."""
    with pytest.raises(DataError, match="duplicate"):
        FeatureStore(ids=("a", "a"), values=np.zeros((2, 2)))


def test_feature_store_rejects_non_finite():
    """Test NaN features are refused."""
    with pytest.raises(DataError):
        FeatureStore.from_mapping({"a": [np.nan, 1.0]})


def test_feature_store_missing_row():
    """Test looking up an unknown id names it."""
    store = FeatureStore.from_mapping({"a": [1.0, 2.0]})
    with pytest.raises(DataError, match="'b'"):
        store.rows(["a", "b"])


def test_feature_file_round_trip(tmp_path):
    """Test float32-representable features come back exactly."""
    store = FeatureStore.from_mapping({"pocket": [0.5, -1.25], "lig-é": [2.0, 0.0]})
    path = tmp_path / "features.hypsf"
    write_features(path, store)
    loaded = load_features(path)
    assert loaded.ids == store.ids
    np.testing.assert_array_equal(loaded.values, store.values)


def test_feature_file_truncated():
    """Test a truncated feature file is a format error."""
    data = encode_features(FeatureStore.from_mapping({"a": [1.0, 2.0]}))
    with pytest.raises(FormatError):
        decode_features(data[:-3])


def test_parse_assays():
    """Test a header plus one record parses."""
    assays = parse_assays([HEADER, assay_line(), ""])
    assert len(assays) == 1
    assert assays[0].ligands[0].affinity == 7.0


def test_lower_stronger_is_flipped():
    """Test lower-is-stronger affinities are negated on load."""
    header = json.dumps({"format": "hypseek-assays", "version": 1, "affinity_orientation": "lower_stronger"})
    ligands = [
        {"ligand_id": "x", "feature_id": "x", "active": True, "affinity": 10.0},
        {"ligand_id": "y", "feature_id": "y", "active": False, "affinity": 900.0},
    ]
    assays = parse_assays([header, assay_line(ligands=ligands)])
    assert [lg.affinity for lg in assays[0].ligands] == [-10.0, -900.0]


def test_orientation_mismatch():
    """Test actives weaker than inactives are reported as a data error."""
    ligands = [
        {"ligand_id": "x", "feature_id": "x", "active": True, "affinity": 1.0},
        {"ligand_id": "y", "feature_id": "y", "active": False, "affinity": 9.0},
    ]
    with pytest.raises(DataError, match="data-orientation"):
        parse_assays([HEADER, assay_line(ligands=ligands)])


@pytest.mark.parametrize(
    "lines,message",
    [
        (["{not json"], "invalid JSON"),
        ([json.dumps({"format": "other", "version": 1, "affinity_orientation": "higher_stronger"})], "format"),
        ([HEADER, assay_line(), assay_line()], "duplicate assay_id"),
        ([HEADER, json.dumps({"assay_id": "a"})], "target_id"),
    ],
)
def test_parse_assay_errors(lines, message):
    """Test malformed assay files raise DataError with a location."""
    with pytest.raises(DataError, match=message):
        parse_assays(lines, source="assays.jsonl")


def test_duplicate_ligand_in_assay():
    """Test a ligand listed twice in one assay is refused."""
    ligands = [
        {"ligand_id": "x", "feature_id": "x"},
        {"ligand_id": "x", "feature_id": "y"},
    ]
    with pytest.raises(DataError, match="duplicate ligand_id"):
        parse_assays([HEADER, assay_line(ligands=ligands)])


def test_load_assays_missing(tmp_path):
    """Test a missing assay file is a data error."""
    with pytest.raises(DataError, match="not found"):
        load_assays(tmp_path / "absent.jsonl")


def test_assay_file_round_trip(tmp_path):
    """Test written assays load back equal."""
    assays, _ = generate_synthetic(targets=2, ligands_per_assay=3, dim=4, noise=0.1, seed=0)
    path = tmp_path / "assays.jsonl"
    write_assays(path, assays)
    assert load_assays(path) == assays


def test_validate_references():
    """Test a missing ligand feature is named."""
    assays = parse_assays([HEADER, assay_line()])
    store = FeatureStore.from_mapping({"p1": [0.0], "x": [1.0]})
    with pytest.raises(DataError, match="'y'"):
        validate_references(assays, store)


def test_split_counts_largest_remainder():
    """Test counts sum to the total and follow the fractions."""
    assert split_counts(10, (0.8, 0.1, 0.1)) == [8, 1, 1]
    assert sum(split_counts(7, (0.5, 0.25, 0.25))) == 7


def test_split_of_twenty_targets():
    """Test an 80/10/10 split of 20 targets gives 16, 2 and 2 targets."""
    assert split_counts(20, (0.8, 0.1, 0.1)) == [16, 2, 2]
    assays, _ = generate_synthetic(targets=20, ligands_per_assay=2, dim=3, noise=0.1, seed=0)
    parts = split_assays(assays, (0.8, 0.1, 0.1), seed=0)
    assert [len({a.target_id for a in part}) for part in parts] == [16, 2, 2]


def test_split_is_target_disjoint():
    """Test no target appears in two splits and the split is seeded."""
    assays, _ = generate_synthetic(targets=10, ligands_per_assay=2, dim=3, noise=0.1, seed=0)
    parts = split_assays(assays, (0.6, 0.2, 0.2), seed=4)
    targets = [{a.target_id for a in part} for part in parts]
    assert [len(t) for t in targets] == [6, 2, 2]
    assert not (targets[0] & targets[1] or targets[0] & targets[2] or targets[1] & targets[2])
    assert split_assays(assays, (0.6, 0.2, 0.2), seed=4) == parts


def test_split_fraction_errors():
    """Test bad fractions are configuration errors."""
    assays, _ = generate_synthetic(targets=3, ligands_per_assay=2, dim=3, noise=0.1, seed=0)
    with pytest.raises(ConfigError):
        split_assays(assays, (0.5, 0.5, 0.5), seed=0)
    with pytest.raises(DataError):
        split_assays(assays[:1], (0.5, 0.25, 0.25), seed=0)


def test_synthetic_is_deterministic():
    """Test the same seed gives the same fixture."""
    a_assays, a_store = generate_synthetic(targets=3, ligands_per_assay=4, dim=5, noise=0.05, seed=9)
    b_assays, b_store = generate_synthetic(targets=3, ligands_per_assay=4, dim=5, noise=0.05, seed=9)
    assert a_assays == b_assays
    np.testing.assert_array_equal(a_store.values, b_store.values)


def test_synthetic_features_survive_feature_file(tmp_path):
    """Test generated features are already at file precision."""
    _, synthetic = generate_synthetic(targets=2, ligands_per_assay=4, dim=5, noise=0.05, seed=3)
    spec = CliffPairSpec(pair_count=3, targets=2, ligands_per_assay=4, dim=5)
    _, cliffs, _ = generate_cliff_pairs(spec, seed=3)
    for store in (synthetic, cliffs):
        path = tmp_path / "features.hypsf"
        write_features(path, store)
        np.testing.assert_array_equal(load_features(path).values, store.values)


def test_synthetic_labels_top_half():
    """Test the strongest half of every assay is active."""
    assays, store = generate_synthetic(targets=2, ligands_per_assay=6, dim=4, noise=0.05, seed=2)
    for assay in assays:
        actives = sorted(lg.affinity for lg in assay.ligands if lg.active)
        inactives = sorted(lg.affinity for lg in assay.ligands if not lg.active)
        assert len(actives) == 3
        assert actives[0] > inactives[-1]
    validate_references(assays, store)


def test_cliff_pairs():
    """Test cliff pairs sit epsilon apart with the requested affinity gap."""
    spec = CliffPairSpec(feature_epsilon=0.01, affinity_gap=3.0, pair_count=4, targets=2, ligands_per_assay=5, dim=6)
    assays, store, pairs = generate_cliff_pairs(spec, seed=1)
    assert [p.pair_id for p in pairs] == ["cliff-000", "cliff-001", "cliff-002", "cliff-003"]
    by_id = {lg.ligand_id: lg for a in assays for lg in a.ligands}
    for pair in pairs:
        distance = np.linalg.norm(store.row(pair.strong_ligand) - store.row(pair.weak_ligand))
        assert distance == pytest.approx(0.01, rel=1e-4)
        assert distance == pair.feature_distance
        gap = by_id[pair.strong_ligand].affinity - by_id[pair.weak_ligand].affinity
        assert gap == pytest.approx(3.0)


def test_cliff_spec_rejects_large_epsilon():
    """Test epsilon must be small relative to the prototype radius."""
    with pytest.raises(ValueError):
        CliffPairSpec(feature_epsilon=0.5)


def test_cliff_manifest_round_trip(tmp_path):
    """Test the manifest reads back what was written."""
    spec = CliffPairSpec(pair_count=2, targets=2, ligands_per_assay=3, dim=4)
    _, _, pairs = generate_cliff_pairs(spec, seed=0)
    path = tmp_path / "pairs.tsv"
    write_cliff_manifest(path, pairs)
    assert load_cliff_manifest(path) == pairs


def test_cliff_manifest_bad_header(tmp_path):
    """Test a file without the manifest header is refused."""
    path = tmp_path / "pairs.tsv"
    path.write_text("a\tb\n")
    with pytest.raises(DataError):
        load_cliff_manifest(path)

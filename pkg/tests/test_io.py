import json

import numpy as np
import pytest

from scmalab.io import CodebookFileError, codebook_from_dict, codebook_to_dict, load_codebook, save_codebook


def test_round_trip(cbs, tmp_path):
    path = tmp_path / "cb.json"
    save_codebook(cbs, path)
    back = load_codebook(path)
    assert back.graph == cbs.graph
    np.testing.assert_array_equal(back.codewords, cbs.codewords)
    np.testing.assert_array_equal(back.mother.points, cbs.mother.points)
    assert back.mother.alpha == cbs.mother.alpha


def test_document_layout(cbs):
    doc = codebook_to_dict(cbs)
    assert (doc["K"], doc["J"], doc["M"], doc["d_v"], doc["d_f"]) == (4, 6, 4, 2, 3)
    assert np.array(doc["codewords"]).shape == (6, 4, 4, 2)
    json.dumps(doc)


def test_mother_is_optional(cbs):
    doc = codebook_to_dict(cbs)
    del doc["mother"]
    assert codebook_from_dict(doc).mother is None


@pytest.mark.parametrize(
    "edit, match",
    [
        (lambda d: d.update(extra=1), "unknown"),
        (lambda d: d.pop("codewords"), "missing"),
        (lambda d: d.update(K=5), "disagrees"),
        (lambda d: d.update(d_f=2), "disagrees"),
        (lambda d: d.update(M=3), "power of two"),
        (lambda d: d["codewords"].pop(), "users"),
        (lambda d: d["codewords"][0][2].__setitem__(0, [0.1, 0.0]), "outside"),
        (lambda d: d.update(F=[[1, 2], [0, 1]]), "F"),
        (lambda d: d["mother"].update(gamma=1), "mother"),
    ],
)
def test_malformed_documents(cbs, edit, match):
    doc = json.loads(json.dumps(codebook_to_dict(cbs)))
    edit(doc)
    with pytest.raises(CodebookFileError, match=match):
        codebook_from_dict(doc)


def test_unreadable_and_broken_files(tmp_path):
    with pytest.raises(CodebookFileError, match="cannot read"):
        load_codebook(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(CodebookFileError, match="malformed"):
        load_codebook(bad)

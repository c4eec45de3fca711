import json
import math

import pytest

import fashionrec as fr


@pytest.fixture(scope="module")
def catalog_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("catalog")
    stats = fr.make_fixture(str(out), outfits=60, users=8, items_per_category=12)
    assert stats["n_outfits"] == 60
    return out


@pytest.fixture(scope="module")
def catalog(catalog_dir):
    return fr.Catalog.load(str(catalog_dir))


def test_catalog_accessors(catalog):
    assert catalog.stats()["n_items"] == 72
    assert len(catalog.outfit_ids()) == 60
    first = catalog.item("i0001")
    assert first["category"] in catalog.categories()


def test_mock_embedding_golden():
    v = fr.mock_embed("a", 4)
    assert v == pytest.approx([-0.1743388383346326, 0.6770306285684299, 0.6688541544464219, 0.25272439041004613])
    assert fr.cosine(v, v) == pytest.approx(1.0)


def test_history_score_and_filter(catalog):
    assert fr.history_score(1.0, 4, 4, 2.0) == pytest.approx(3.0, abs=1e-9)
    admitted = 0
    for user in catalog.user_ids():
        for outfit in catalog.user_outfits(user):
            out = fr.filter_user_history(catalog, outfit, user, dim=32)
            if out is None:
                continue
            admitted += 1
            assert out["target"] not in out["partial"]
            assert len(out["filtered_history"]) <= 5
    assert admitted > 0


def test_alternative_pairs(catalog):
    for a, b, shared in fr.find_alternative_pairs(catalog):
        assert a < b and len(shared) >= 2
        assert set(shared) <= set(catalog.outfit(a)) & set(catalog.outfit(b))


def test_build_dataset(catalog, tmp_path):
    summary = fr.build_dataset(catalog, str(tmp_path), tasks=["basic"], dim=32)
    assert (tmp_path / "basic.jsonl").exists()
    split = json.loads((tmp_path / "split.json").read_text())
    assert sum(len(split[0]["ids"][k]) for k in ("train", "valid", "test")) == 60
    assert summary["tasks"][0]["samples"] == 60


def test_metrics_and_losses():
    assert fr.sbert_similarity("same", "same") == pytest.approx(100.0, abs=1e-6)
    assert -100.0 <= fr.cis("x.png", "y.png") <= 100.0
    report = fr.evaluate_run([{"id": "a", "gen_text": "x", "gt_text": "x"}])
    assert report["sbert"]["mean"] == pytest.approx(100.0, abs=1e-6)
    uniform = [[0.0] * 8 for _ in range(5)]
    assert fr.mmr_loss(uniform, [1, 2, 3], 2) == pytest.approx(3 * math.log(8), rel=1e-9)
    assert fr.t2i_loss(uniform, 5, [(0, 1), (4, 7)]) == pytest.approx(2 * math.log(8), rel=1e-9)


def test_errors_carry_codes():
    with pytest.raises(fr.FashionrecError) as info:
        fr.t2i_loss([[0.0, 0.0]], 1, [(3, 0)])
    assert info.value.args[0] == "out_of_range"


def test_assistant_and_rpc(catalog_dir, tmp_path):
    bot = fr.Assistant(str(catalog_dir), str(tmp_path), dim=32)
    sid = bot.create_session("u001")
    reply = bot.send(sid, "What goes with this?", ["images/i0001.ppm"])
    assert reply["tool_trace"][0]["tool"] == "recommend"
    follow = bot.send(sid, "Find similar items")
    assert [c["tool"] for c in follow["tool_trace"]] == ["retrieve_similar"]
    assert len(bot.transcript(sid)["turns"]) == 2
    listed = json.loads(bot.rpc('{"jsonrpc":"2.0","id":1,"method":"tools/list"}'))
    assert len(listed["result"]["tools"]) == 4
    assert json.loads(bot.rpc("{"))["error"]["code"] == -32700


def test_run_cli(catalog_dir):
    code, out, _ = fr.run_cli(["--log-level", "off", "ingest", "--catalog", str(catalog_dir)])
    assert code == 0 and json.loads(out)["stats"]["n_users"] == 8
    code, _, err = fr.run_cli(["nonsense"])
    assert code == 2 and err

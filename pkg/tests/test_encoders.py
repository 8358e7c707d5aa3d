import math

import pytest
import torch

from conftest import make_doc, mixed_docs, tiny_batch, tiny_model, tiny_vocab
from kgsum.encoders import (
    MAX_COUNT_BUCKET,
    DocumentEncoder,
    GraphAttentionLayer,
    GraphEncoder,
    GraphEncoderConfig,
    LookupEmbedding,
    SegGraphEncoder,
    apply_salience_mask,
    encode_document,
    graph_attention_stack,
    masked_max_pool,
    masked_softmax,
)
from kgsum.features import collate, graph_features_for, make_example, seg_graph_features
from kgsum.kg import build_seg_graphs
from kgsum.model import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from kgsum.vocab import Vocab


def doc_encoder(hidden=256, vocab=None):
    torch.manual_seed(0)
    vocab = vocab or Vocab([f"t{i}" for i in range(20)])
    return DocumentEncoder(LookupEmbedding(torch.nn.Embedding(len(vocab), 16)), hidden), vocab


# -- document encoder -------------------------------------------------------------


def test_ten_tokens_give_ten_rows_of_256():
    enc, vocab = doc_encoder()
    states = encode_document([f"t{i}" for i in range(10)], vocab, enc)
    assert states.shape == (10, 256)


def test_single_token_has_both_directions():
    enc, vocab = doc_encoder()
    states = encode_document(["t3"], vocab, enc)
    assert states.shape == (1, 256)
    assert states[0, :128].abs().sum() > 0 and states[0, 128:].abs().sum() > 0


def test_document_encoding_is_deterministic():
    enc, vocab = doc_encoder()
    toks = ["t1", "t2", "t1", "t5"]
    assert torch.equal(encode_document(toks, vocab, enc), encode_document(toks, vocab, enc))


def test_empty_document_rejected():
    enc, vocab = doc_encoder()
    with pytest.raises(ValueError):
        encode_document([], vocab, enc)


def test_padding_does_not_change_states():
    enc, _ = doc_encoder(hidden=8)
    ids = torch.tensor([[4, 5, 6, 0, 0], [4, 5, 6, 7, 8]])
    out, final = enc(ids, torch.tensor([3, 5]))
    alone, alone_final = enc(ids[:1, :3], torch.tensor([3]))
    assert torch.allclose(out[0, :3], alone[0], atol=1e-6)
    assert torch.allclose(final[0], alone_final[0], atol=1e-6)


def test_embedding_provider_row_count():
    enc, _ = doc_encoder(hidden=8)
    assert enc.provider.embed(torch.tensor([[1, 2, 3]])).shape == (1, 3, 16)


def test_graph_config_node_dim():
    assert GraphEncoderConfig().node_dim == 288
    with pytest.raises(ValueError):
        GraphAttentionLayer(10, 4, 3)


# -- node initialisation ------------------------------------------------------------


def graph_encoder(token_dim=3, heads=1, head_dim=3):
    torch.manual_seed(1)
    return GraphEncoder(token_dim, GraphEncoderConfig(heads, head_dim, 2)).double()


def test_one_token_mention_initialisation():
    ge = graph_encoder()
    states = torch.randn(1, 4, 3, dtype=torch.float64)
    pool = torch.tensor([[[0.0, 0.0, 1.0, 0.0]]], dtype=torch.float64)
    init = ge.init_nodes(states, pool, torch.tensor([[1]]))
    want = ge.node_proj(states[0, 2]) + ge.count_embedding.weight[1]
    assert torch.allclose(init[0, 0], want, atol=1e-12)


def test_two_mentions_average_four_tokens():
    doc = make_doc("m", ["a b c d e f ."], triples=[((0, 2), (2, 3), (4, 6), 0)], chains=[[(0, 2), (4, 6)]])
    # subject and object corefer: one entity node with two 2-token mentions
    feats = graph_features_for(doc, "docgraph", min_nodes=1)
    vocab = Vocab(list(doc.tokens))
    batch = collate([make_example(doc, vocab, feats)], dtype=torch.float64)
    ent = [i for i, c in enumerate(feats.counts) if c == 2][0]
    ge = graph_encoder()
    states = torch.randn(1, 7, 3, dtype=torch.float64)
    init = ge.init_nodes(states, batch.pool, batch.counts)
    mean = states[0, [0, 1, 4, 5]].mean(0)
    assert torch.allclose(init[0, ent], ge.node_proj(mean) + ge.count_embedding.weight[2], atol=1e-12)


def test_mention_count_capped_at_ten():
    ge = graph_encoder()
    states = torch.randn(1, 2, 3, dtype=torch.float64)
    pool = torch.tensor([[[1.0, 0.0], [1.0, 0.0]]], dtype=torch.float64)
    init = ge.init_nodes(states, pool, torch.tensor([[25, 10]]))
    assert MAX_COUNT_BUCKET == 10
    assert torch.equal(init[0, 0], init[0, 1])


def test_coreferent_nodes_share_initialisation(john_doc):
    seg = build_seg_graphs(john_doc)
    feats = seg_graph_features(seg)
    vocab = tiny_vocab([john_doc])
    batch = collate([make_example(john_doc, vocab, feats)])
    model = tiny_model("seggraph", len(vocab))
    enc = model.encode(batch)
    pairs = [(feats.share[i], i) for i in range(feats.num_nodes) if feats.share[i] != i]
    assert len(pairs) == 2  # john/he and the car/it
    for a, b in pairs:
        assert torch.equal(enc.node_init[0, a], enc.node_init[0, b])
    others = [i for i in range(feats.num_nodes) if feats.share[i] == i]
    assert not torch.equal(enc.node_init[0, others[0]], enc.node_init[0, others[1]])


# -- salience gate ---------------------------------------------------------------------


def test_zero_gate_parameters_give_half():
    v = torch.randn(5, 4, dtype=torch.float64)
    masked, gates = apply_salience_mask(v, torch.zeros(4, dtype=torch.float64))
    assert torch.allclose(gates, torch.full((5,), 0.5, dtype=torch.float64))
    assert torch.allclose(masked, 0.5 * v)


def test_zero_node_gives_half_and_zero():
    masked, gates = apply_salience_mask(torch.zeros(1, 4), torch.randn(4))
    assert gates.item() == 0.5 and torch.equal(masked, torch.zeros(1, 4))


def test_large_logit_leaves_node_unchanged():
    v = torch.tensor([[1.0, 2.0]], dtype=torch.float64)
    u = torch.tensor([20.0, 0.0], dtype=torch.float64)
    masked, gates = apply_salience_mask(v, u)
    assert gates.item() == pytest.approx(1.0, abs=1e-6)
    assert torch.allclose(masked, v, atol=1e-6)


# -- graph attention ----------------------------------------------------------------------


def identity_layer(dim=2):
    layer = GraphAttentionLayer(dim, 1, dim).double()
    with torch.no_grad():
        for w in (layer.value_proj, layer.query_proj, layer.key_proj):
            w.copy_(torch.eye(dim, dtype=torch.float64).unsqueeze(0))
    return layer


def test_singleton_self_loop():
    layer = GraphAttentionLayer(4, 2, 2).double()
    v = torch.randn(1, 1, 4, dtype=torch.float64)
    out, alpha = layer(v, torch.ones(1, 1, 1, dtype=torch.bool), return_attention=True)
    assert torch.allclose(alpha, torch.ones_like(alpha))
    heads = torch.cat([layer.value_proj[h] @ v[0, 0] for h in range(2)])
    assert torch.allclose(out[0, 0], v[0, 0] + heads, atol=1e-12)


def test_identical_keys_give_uniform_weights():
    layer = GraphAttentionLayer(4, 2, 2).double()
    with torch.no_grad():
        layer.key_proj.zero_()
    v = torch.randn(1, 2, 4, dtype=torch.float64)
    _, alpha = layer(v, torch.ones(1, 2, 2, dtype=torch.bool), return_attention=True)
    assert torch.allclose(alpha, torch.full_like(alpha, 0.5))


def test_line_graph_matches_hand_calculation():
    layer = identity_layer()
    v = torch.tensor([[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]], dtype=torch.float64)
    adj = torch.tensor([[[1, 1, 0], [1, 1, 1], [0, 1, 1]]], dtype=torch.bool)
    out = layer(v, adj)[0]
    e = math.e
    want = torch.tensor([
        [1 + e / (e + 1), 1 / (e + 1)],
        [(1 + e) / (1 + 2 * e), 1 + 2 * e / (1 + 2 * e)],
        [1 + e / (1 + e), 2.0],
    ], dtype=torch.float64)
    assert torch.allclose(out, want, atol=1e-12)


def test_zero_value_weights_make_stack_identity():
    layers = torch.nn.ModuleList(GraphAttentionLayer(6, 2, 3).double() for _ in range(2))
    for layer in layers:
        with torch.no_grad():
            layer.value_proj.zero_()
    v = torch.randn(5, 6, dtype=torch.float64)
    adj = torch.rand(5, 5) > 0.5
    adj |= torch.eye(5, dtype=torch.bool)
    assert torch.equal(graph_attention_stack(v, adj, layers), v)


def test_attention_rows_sum_to_one_over_neighbourhood():
    torch.manual_seed(3)
    layer = GraphAttentionLayer(8, 4, 2)
    v = torch.randn(2, 6, 8)
    adj = (torch.rand(2, 6, 6) > 0.6) | torch.eye(6, dtype=torch.bool)
    _, alpha = layer(v, adj, return_attention=True)
    assert torch.allclose(alpha.sum(-1), torch.ones(2, 4, 6), atol=1e-5)
    assert bool((alpha[~adj.unsqueeze(1).expand_as(alpha)] == 0).all())


def test_masked_softmax_handles_empty_rows():
    scores = torch.randn(2, 3, requires_grad=True)
    mask = torch.tensor([[True, False, True], [False, False, False]])
    p = masked_softmax(scores, mask)
    assert torch.allclose(p[0].sum(), torch.tensor(1.0)) and p[0, 1] == 0
    assert torch.equal(p[1], torch.zeros(3))
    p.sum().backward()
    assert torch.isfinite(scores.grad).all()


# -- seg graph pooling ----------------------------------------------------------------------


def test_max_pool_by_hand():
    states = torch.tensor([[[1.0, -2.0], [3.0, 0.0]]])
    pooled, nonempty = masked_max_pool(states, torch.tensor([[0, 0]]), torch.tensor([[True, True]]), 1)
    assert pooled.tolist() == [[[3.0, 0.0]]] and nonempty.tolist() == [[True]]


def test_single_node_pool_is_its_state():
    states = torch.randn(1, 1, 4)
    pooled, _ = masked_max_pool(states, torch.tensor([[0]]), torch.tensor([[True]]), 1)
    assert torch.equal(pooled[0, 0], states[0, 0])


def test_two_subgraphs_give_two_rows_and_null_for_empty():
    torch.manual_seed(0)
    seg = SegGraphEncoder(4, 6)
    states = torch.randn(1, 2, 4)
    sub = torch.tensor([[0, 0]])
    mask = torch.tensor([[True, True]])
    out, pooled = seg(states, sub, mask, torch.tensor([[True, True]]))
    assert out.shape == (1, 2, 6)
    assert torch.equal(pooled[0, 1], torch.zeros(4))
    # the empty paragraph is fed the learned placeholder, so changing it changes its state
    before = out.detach().clone()
    with torch.no_grad():
        seg.null_subgraph.add_(1.0)
    after, _ = seg(states, sub, mask, torch.tensor([[True, True]]))
    assert not torch.allclose(before[0, 1], after[0, 1])


# -- model wiring -------------------------------------------------------------------------------


def test_nograph_model_has_no_graph_parameters():
    names = [n for n, _ in tiny_model("nograph", 30).named_parameters()]
    assert not any(n.startswith(("graph_encoder", "seg_encoder", "decoder.graph_attention")) for n in names)
    assert not any("W_extra" in n for n in names)
    doc_names = [n for n, _ in tiny_model("docgraph", 30).named_parameters()]
    assert any(n.startswith("graph_encoder") for n in doc_names)


def test_gates_lie_strictly_inside_unit_interval():
    docs = mixed_docs()
    vocab = tiny_vocab(docs)
    for variant in ("docgraph", "seggraph"):
        enc = tiny_model(variant, len(vocab)).encode(tiny_batch(docs, vocab, variant))
        g = enc.masks[enc.node_mask]
        assert bool(((g > 0) & (g < 1)).all())
        assert enc.node_states.shape[-1] == 8


@pytest.mark.parametrize("variant", ["nograph", "docgraph", "seggraph"])
def test_checkpoint_roundtrip(tmp_path, variant):
    docs = mixed_docs()
    vocab = tiny_vocab(docs)
    model = tiny_model(variant, len(vocab), seed=4)
    batch = tiny_batch(docs, vocab, variant)
    save_checkpoint(tmp_path / "m.pt", model, {"note": "x"})
    loaded, blob = load_checkpoint(tmp_path / "m.pt")
    assert blob["format_version"] == CHECKPOINT_VERSION and blob["note"] == "x"
    assert blob["shapes"] == model.parameter_shapes()
    model.eval()
    loaded.eval()
    assert torch.equal(model(batch).token_nll, loaded(batch).token_nll)


def test_checkpoint_version_checked(tmp_path):
    model = tiny_model("nograph", 20)
    save_checkpoint(tmp_path / "m.pt", model)
    blob = torch.load(tmp_path / "m.pt", weights_only=False)
    blob["format_version"] = 99
    torch.save(blob, tmp_path / "m.pt")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "m.pt")

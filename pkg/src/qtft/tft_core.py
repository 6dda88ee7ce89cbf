"""Classical temporal fusion transformer built on the tape in :mod:`qtft.grad`.

The building blocks are gated linear units, gated residual networks,
softmax variable selection, static covariate encoders, an LSTM
sequence-to-sequence pair and interpretable multi-head attention (shared
value projection, head-averaged aggregation).  ``tft_forward`` wires
them into the five-stage pass that ends in per-quantile dense heads on
the future positions.

All operations accept and return graph nodes; plain arrays are wrapped
automatically, so the blocks can be probed numerically without touching
the tape API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import grad
from .grad import Node, as_node, softmax  # noqa: F401  (softmax is part of the public surface)


# --------------------------------------------------------------------------
# Parameter containers
# --------------------------------------------------------------------------

@dataclass
class DenseParams:
    W: Node
    b: Node


@dataclass
class GLUParams:
    gate: DenseParams
    lin: DenseParams


@dataclass
class LayerNormParams:
    """eps sits inside the square root; gain/bias present only when affine."""

    eps: float = 1e-5
    gain: Node | None = None
    bias: Node | None = None


@dataclass
class GRNParams:
    primary: DenseParams            # W1, b12
    context: Node | None            # W2, no bias; None when the block takes no context
    out: DenseParams                # W3, b3
    glu: GLUParams                  # W4, b4, W5, b5
    norm: LayerNormParams


@dataclass
class AttentionParams:
    wq: list[Node]                  # one (d, d_attn) per head
    wk: list[Node]
    wv: Node                        # shared value projection
    wh: Node                        # (d_attn, d) head-combine matrix
    num_heads: int
    d_attn: int


@dataclass
class LSTMParams:
    wi: DenseParams
    wf: DenseParams
    wg: DenseParams
    wo: DenseParams
    hidden: int


@dataclass
class VariableSelectionParams:
    var_grns: list[GRNParams]       # one per input variable, applied to its embedding
    flatten_proj: DenseParams       # (m*d -> m) map feeding the weight GRN
    weight_grn: GRNParams           # width m; context enters through its W2


@dataclass
class TFTParams:
    static_embed: list[DenseParams]
    past_embed: list[DenseParams]
    future_embed: list[DenseParams]
    static_vsn: VariableSelectionParams
    past_vsn: VariableSelectionParams
    future_vsn: VariableSelectionParams
    static_encoders: list[GRNParams]          # -> c_s, c_e, c_c, c_h in this order
    encoder_lstm: LSTMParams
    decoder_lstm: LSTMParams
    post_lstm_glu: GLUParams
    post_lstm_norm: LayerNormParams
    enrichment: GRNParams
    attention: AttentionParams
    post_attn_glu: GLUParams
    post_attn_norm: LayerNormParams
    positionwise: GRNParams
    final_glu: GLUParams
    final_norm: LayerNormParams
    heads: list[DenseParams]                  # one (1, d) dense per quantile


# --------------------------------------------------------------------------
# Blocks
# --------------------------------------------------------------------------

def dense(p: DenseParams, x) -> Node:
    return grad.add(grad.matvec(p.W, as_node(x)), p.b)


def glu(x, p: GLUParams) -> Node:
    """sigmoid(W4 x + b4) * (W5 x + b5) elementwise."""
    x = as_node(x)
    return grad.mul(grad.sigmoid(dense(p.gate, x)), dense(p.lin, x))


def layer_norm(x, p: LayerNormParams) -> Node:
    return grad.layer_norm(as_node(x), eps=p.eps, gain=p.gain, bias=p.bias)


def grn(a, c, p: GRNParams) -> Node:
    """Gated residual network: LayerNorm(a + GLU(W3 ELU(W1 a + W2 c + b12) + b3)).

    The context term is dropped when ``c`` is None.
    """
    a = as_node(a)
    eta1_pre = dense(p.primary, a)
    if c is not None:
        if p.context is None:
            raise ValueError("GRN got a context vector but has no W2")
        eta1_pre = grad.add(eta1_pre, grad.matvec(p.context, as_node(c)))
    eta1 = grad.elu(eta1_pre)
    eta2 = dense(p.out, eta1)
    eta3 = glu(eta2, p.glu)
    return layer_norm(grad.add(a, eta3), p.norm)


def variable_selection(embeddings, c_s, p: VariableSelectionParams):
    """Softmax-weighted combination of per-variable GRN outputs.

    Selection weights come from a GRN (width m) over a dense projection of
    the flattened concatenation; the static context, when given, enters
    that GRN.  Returns ``(selected, weights)``.
    """
    embeddings = [as_node(e) for e in embeddings]
    if len(embeddings) != len(p.var_grns):
        raise ValueError(f"expected {len(p.var_grns)} embeddings, got {len(embeddings)}")
    flat = grad.concat(embeddings) if len(embeddings) > 1 else embeddings[0]
    weights = softmax(grn(dense(p.flatten_proj, flat), c_s, p.weight_grn))
    processed = [grn(e, None, g) for e, g in zip(embeddings, p.var_grns)]
    return grad.weighted_sum(weights, processed), weights


def static_covariate_encoder(xi, encoders: list[GRNParams]):
    """Four independent GRNs on the selected static vector: c_s, c_e, c_c, c_h."""
    xi = as_node(xi)
    if len(encoders) != 4:
        raise ValueError("static covariate encoder needs exactly four GRNs")
    return tuple(grn(xi, None, enc) for enc in encoders)


def lstm_step(x, h, c, p: LSTMParams):
    xh = grad.concat([as_node(x), h])
    i = grad.sigmoid(dense(p.wi, xh))
    f = grad.sigmoid(dense(p.wf, xh))
    g = grad.tanh(dense(p.wg, xh))
    o = grad.sigmoid(dense(p.wo, xh))
    c_new = grad.add(grad.mul(f, c), grad.mul(i, g))
    h_new = grad.mul(o, grad.tanh(c_new))
    return h_new, c_new


def lstm_seq(inputs, h0, c0, p: LSTMParams):
    """Standard LSTM recursion; returns (hidden outputs, (h_T, c_T))."""
    if not inputs:
        raise ValueError("lstm_seq needs a nonempty input sequence")
    h, c = as_node(h0), as_node(c0)
    outputs = []
    for x in inputs:
        h, c = lstm_step(x, h, c, p)
        outputs.append(h)
    return outputs, (h, c)


def causal_mask(n: int) -> np.ndarray:
    """Additive attention mask hiding positions after each query position."""
    m = np.zeros((n, n))
    m[np.triu_indices(n, k=1)] = -1e9
    return m


def attention(q, k, v, d_attn: float, mask: np.ndarray | None = None) -> Node:
    """Scaled dot-product attention: row-softmax(Q K^T / sqrt(d_attn)) V."""
    q, k, v = as_node(q), as_node(k), as_node(v)
    scores = grad.scale(grad.matmul(q, grad.transpose(k)), 1.0 / math.sqrt(d_attn))
    if mask is not None:
        scores = grad.add(scores, grad.const(mask))
    return grad.matmul(grad.softmax_rows(scores), v)


def interpretable_multi_head(s, p: AttentionParams, mask: np.ndarray | None = None) -> Node:
    """Head-averaged attention with a single shared value projection.

    Output is ``mean_h Attention(S Wq_h, S Wk_h, S Wv) @ Wh``.
    """
    s = as_node(s)
    v = grad.matmul(s, p.wv)
    heads = [
        attention(grad.matmul(s, wq), grad.matmul(s, wk), v, p.d_attn, mask)
        for wq, wk in zip(p.wq, p.wk)
    ]
    h_tilde = heads[0]
    for h in heads[1:]:
        h_tilde = grad.add(h_tilde, h)
    h_tilde = grad.scale(h_tilde, 1.0 / p.num_heads)
    return grad.matmul(h_tilde, p.wh)


# --------------------------------------------------------------------------
# Full forward pass
# --------------------------------------------------------------------------

def _embed_steps(rows: np.ndarray, embeds: list[DenseParams]) -> list[list[Node]]:
    """Per time step, one linear d_model embedding per scalar variable."""
    out = []
    for t in range(rows.shape[0]):
        out.append([dense(emb, np.array([rows[t, j]])) for j, emb in enumerate(embeds)])
    return out


def tft_forward_nodes(static_vars, past_vars, future_vars, p: TFTParams,
                      quantiles, mask: np.ndarray | None = None):
    """Forward pass returning one (tau,) prediction node per quantile."""
    static_vars = np.asarray(static_vars, dtype=float)
    past_vars = np.asarray(past_vars, dtype=float)
    future_vars = np.asarray(future_vars, dtype=float)
    k, tau = past_vars.shape[0], future_vars.shape[0]

    static_emb = [dense(emb, np.array([static_vars[j]]))
                  for j, emb in enumerate(p.static_embed)]
    xi_static, _ = variable_selection(static_emb, None, p.static_vsn)
    c_s, c_e, c_c, c_h = static_covariate_encoder(xi_static, p.static_encoders)

    past_sel = [variable_selection(emb, c_s, p.past_vsn)[0]
                for emb in _embed_steps(past_vars, p.past_embed)]
    future_sel = [variable_selection(emb, c_s, p.future_vsn)[0]
                  for emb in _embed_steps(future_vars, p.future_embed)]

    enc_out, (h_T, c_T) = lstm_seq(past_sel, c_h, c_c, p.encoder_lstm)
    dec_out, _ = lstm_seq(future_sel, h_T, c_T, p.decoder_lstm)
    phi = enc_out + dec_out
    selected = past_sel + future_sel

    phi_tilde = [layer_norm(grad.add(sel, glu(ph, p.post_lstm_glu)), p.post_lstm_norm)
                 for sel, ph in zip(selected, phi)]
    theta = [grn(pt, c_e, p.enrichment) for pt in phi_tilde]

    beta_mat = interpretable_multi_head(grad.stack_rows(theta), p.attention, mask)
    delta = [layer_norm(grad.add(theta[i], glu(grad.row(beta_mat, i), p.post_attn_glu)),
                        p.post_attn_norm)
             for i in range(k + tau)]
    psi = [grn(d, None, p.positionwise) for d in delta]
    psi_tilde = [layer_norm(grad.add(phi_tilde[i], glu(psi[i], p.final_glu)), p.final_norm)
                 for i in range(k + tau)]

    future_repr = psi_tilde[k:]
    return [grad.concat([dense(head, r) for r in future_repr]) for head in p.heads]


def tft_forward(static_vars, past_vars, future_vars, p: TFTParams,
                quantiles, mask: np.ndarray | None = None) -> np.ndarray:
    """Quantile forecasts as a (num_quantiles, tau) array."""
    nodes = tft_forward_nodes(static_vars, past_vars, future_vars, p, quantiles, mask)
    return np.stack([n.value for n in nodes])


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------

def init_dense(rng: np.random.Generator, out_dim: int, in_dim: int) -> DenseParams:
    bound = 1.0 / math.sqrt(in_dim)
    return DenseParams(
        W=grad.param(rng.uniform(-bound, bound, size=(out_dim, in_dim))),
        b=grad.param(rng.uniform(-bound, bound, size=out_dim)),
    )


def init_glu(rng, dim: int) -> GLUParams:
    return GLUParams(gate=init_dense(rng, dim, dim), lin=init_dense(rng, dim, dim))


def init_layer_norm(dim: int, affine: bool = False) -> LayerNormParams:
    if not affine:
        return LayerNormParams()
    return LayerNormParams(gain=grad.param(np.ones(dim)), bias=grad.param(np.zeros(dim)))


def init_grn(rng, dim: int, context_dim: int | None = None, affine_norm: bool = False) -> GRNParams:
    context = None
    if context_dim is not None:
        bound = 1.0 / math.sqrt(context_dim)
        context = grad.param(rng.uniform(-bound, bound, size=(dim, context_dim)))
    return GRNParams(
        primary=init_dense(rng, dim, dim),
        context=context,
        out=init_dense(rng, dim, dim),
        glu=init_glu(rng, dim),
        norm=init_layer_norm(dim, affine_norm),
    )


def init_vsn(rng, d_model: int, num_vars: int, context_dim: int | None,
             affine_norm: bool = False) -> VariableSelectionParams:
    return VariableSelectionParams(
        var_grns=[init_grn(rng, d_model, None, affine_norm) for _ in range(num_vars)],
        flatten_proj=init_dense(rng, num_vars, num_vars * d_model),
        weight_grn=init_grn(rng, num_vars, context_dim, affine_norm),
    )


def init_lstm(rng, input_dim: int, hidden: int) -> LSTMParams:
    return LSTMParams(
        wi=init_dense(rng, hidden, input_dim + hidden),
        wf=init_dense(rng, hidden, input_dim + hidden),
        wg=init_dense(rng, hidden, input_dim + hidden),
        wo=init_dense(rng, hidden, input_dim + hidden),
        hidden=hidden,
    )


def init_attention(rng, d_model: int, num_heads: int) -> AttentionParams:
    d_attn = max(1, math.ceil(d_model / num_heads))
    bound = 1.0 / math.sqrt(d_model)

    def mat(rows, cols):
        return grad.param(rng.uniform(-bound, bound, size=(rows, cols)))

    return AttentionParams(
        wq=[mat(d_model, d_attn) for _ in range(num_heads)],
        wk=[mat(d_model, d_attn) for _ in range(num_heads)],
        wv=mat(d_model, d_attn),
        wh=grad.param(rng.uniform(-1.0 / math.sqrt(d_attn), 1.0 / math.sqrt(d_attn),
                                  size=(d_attn, d_model))),
        num_heads=num_heads,
        d_attn=d_attn,
    )


@dataclass
class TFTConfig:
    d_model: int = 2
    num_past_vars: int = 5
    num_future_vars: int = 1
    num_static_vars: int = 1
    num_heads: int = 1
    quantiles: tuple[float, ...] = (0.5,)
    affine_norm: bool = False
    use_causal_mask: bool = False


def init_tft(cfg: TFTConfig, rng: np.random.Generator) -> TFTParams:
    d, an = cfg.d_model, cfg.affine_norm
    return TFTParams(
        static_embed=[init_dense(rng, d, 1) for _ in range(cfg.num_static_vars)],
        past_embed=[init_dense(rng, d, 1) for _ in range(cfg.num_past_vars)],
        future_embed=[init_dense(rng, d, 1) for _ in range(cfg.num_future_vars)],
        static_vsn=init_vsn(rng, d, cfg.num_static_vars, None, an),
        past_vsn=init_vsn(rng, d, cfg.num_past_vars, d, an),
        future_vsn=init_vsn(rng, d, cfg.num_future_vars, d, an),
        static_encoders=[init_grn(rng, d, None, an) for _ in range(4)],
        encoder_lstm=init_lstm(rng, d, d),
        decoder_lstm=init_lstm(rng, d, d),
        post_lstm_glu=init_glu(rng, d),
        post_lstm_norm=init_layer_norm(d, an),
        enrichment=init_grn(rng, d, d, an),
        attention=init_attention(rng, d, cfg.num_heads),
        post_attn_glu=init_glu(rng, d),
        post_attn_norm=init_layer_norm(d, an),
        positionwise=init_grn(rng, d, None, an),
        final_glu=init_glu(rng, d),
        final_norm=init_layer_norm(d, an),
        heads=[init_dense(rng, 1, d) for _ in cfg.quantiles],
    )


def named_leaves(obj, prefix: str = "") -> list[tuple[str, Node]]:
    """Flatten a parameter tree into (dotted name, leaf node) pairs."""
    from .quantum_sim import ParameterizedCircuit

    out: list[tuple[str, Node]] = []
    if isinstance(obj, Node):
        out.append((prefix or "leaf", obj))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            out.extend(named_leaves(item, f"{prefix}.{i}" if prefix else str(i)))
    elif isinstance(obj, ParameterizedCircuit):
        pass  # cached circuit structure, not trainable
    elif hasattr(obj, "__dataclass_fields__"):
        for f in fields(obj):
            val = getattr(obj, f.name)
            if val is None or isinstance(val, (int, float, str, bool, np.ndarray)):
                continue
            out.extend(named_leaves(val, f"{prefix}.{f.name}" if prefix else f.name))
    return out


class TFTModel:
    """Classical model: parameters plus the windowed forward pass."""

    kind = "tft"

    def __init__(self, cfg: TFTConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.params = init_tft(cfg, rng)

    def predict_nodes(self, static_vars, past_vars, future_vars) -> list[Node]:
        mask = causal_mask(np.asarray(past_vars).shape[0] + np.asarray(future_vars).shape[0]) \
            if self.cfg.use_causal_mask else None
        return tft_forward_nodes(static_vars, past_vars, future_vars,
                                 self.params, self.cfg.quantiles, mask)

    def predict(self, static_vars, past_vars, future_vars) -> np.ndarray:
        return np.stack([n.value for n in self.predict_nodes(static_vars, past_vars, future_vars)])

    def named_leaves(self) -> list[tuple[str, Node]]:
        return named_leaves(self.params)

    def leaves(self) -> list[Node]:
        return [node for _, node in self.named_leaves()]

    def param_count(self) -> int:
        return sum(node.value.size for node in self.leaves())

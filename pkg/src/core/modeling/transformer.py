"""Transformer encoder and non-autoregressive decoder with an off-ramp classifier after every layer.

Decoder layers can recompute a subset of positions: rows outside the subset keep their
state bit-for-bit and still contribute keys and values to the recomputed rows.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np

from src.core._exceptions import ConfigurationError, ContractError, ShapeError, TokenIndexError
from src.core.numerics.flops import FlopCategory, flop_scope
from src.core.numerics.tensor import (
    DEFAULT_DTYPE,
    Array,
    Tensor,
    concat,
    dropout,
    gelu,
    index_update,
    layer_norm,
    ones_parameter,
    parameter,
    softmax,
    take,
)
from src.core.text.tokenizer import BOS_ID, EOS_ID, MASK_ID, PAD_ID
from src.infra.logger import get_logger
from src.models.config_models import ModelConfig
from src.models.generation_models import ArDecodeResult
from src.models.tensor_models import CrossMemory, DecoderTrace, EncoderStates, ExitAssignment, SoftDecodeOutput

logger = get_logger()

_NEG_INF = -1e9


class Model:
    """Parameters plus the forward passes of every decode mode.

    Parameters live in one ordered name -> Tensor mapping. Layers are numbered from 1.
    With ``share_off_ramps`` every layer's off-ramp resolves to the same ``ramp.*`` tensors.
    """

    def __init__(self, config: ModelConfig, seed: int = 0, dtype: Any = DEFAULT_DTYPE):
        if config.vocab_size is None:
            raise ConfigurationError("ModelConfig.vocab_size must be set before building a model")
        self.config = config
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.training = False
        self.params: dict[str, Tensor] = {}
        self._dropout_rng = np.random.default_rng([seed, 1])
        self._build(np.random.default_rng([seed, 0]))

    # Construction
    def _add(self, name: str, tensor: Tensor) -> None:
        self.params[name] = tensor

    def _add_linear(self, name: str, fan_in: int, fan_out: int, rng: np.random.Generator, bias: bool) -> None:
        self._add(f"{name}.weight", parameter((fan_in, fan_out), rng, dtype=self.dtype))
        if bias:
            self._add(f"{name}.bias", parameter((fan_out,), rng, std=0.0, dtype=self.dtype))

    def _add_norm(self, name: str) -> None:
        self._add(f"{name}.gain", ones_parameter((self.config.d_model,), dtype=self.dtype))
        self._add(f"{name}.bias", Tensor(np.zeros(self.config.d_model, dtype=self.dtype), requires_grad=True))

    def _add_attention(self, name: str, rng: np.random.Generator) -> None:
        d = self.config.d_model
        for proj in ("query", "key", "value", "out"):
            self._add_linear(f"{name}.{proj}", d, d, rng, bias=False)

    def _add_block(self, name: str, rng: np.random.Generator, cross: bool) -> None:
        d, d_ff = self.config.d_model, self.config.d_ff
        self._add_norm(f"{name}.self_norm")
        self._add_attention(f"{name}.self_attn", rng)
        if cross:
            self._add_norm(f"{name}.cross_norm")
            self._add_attention(f"{name}.cross_attn", rng)
        self._add_norm(f"{name}.ffn_norm")
        self._add_linear(f"{name}.ffn.up", d, d_ff, rng, bias=True)
        self._add_linear(f"{name}.ffn.down", d_ff, d, rng, bias=True)

    def _build(self, rng: np.random.Generator) -> None:
        cfg = self.config
        d, vocab_size = cfg.d_model, self.vocab_size
        self._add("embed.token", parameter((vocab_size, d), rng, dtype=self.dtype))
        self._add("encoder.position", parameter((cfg.max_source_len, d), rng, dtype=self.dtype))
        self._add("decoder.position", parameter((cfg.max_target_len, d), rng, dtype=self.dtype))
        for layer in range(1, cfg.layers + 1):
            self._add_block(f"encoder.{layer}", rng, cross=False)
        self._add_norm("encoder.final_norm")
        for layer in range(1, cfg.layers + 1):
            self._add_block(f"decoder.{layer}", rng, cross=True)

        for prefix in dict.fromkeys(self._ramp_prefix(layer) for layer in range(1, cfg.layers + 1)):
            self._add_norm(f"{prefix}.norm")
            self._add_linear(prefix, d, vocab_size, rng, bias=True)

        # Embedding half small, hidden half identity: the fused state starts out as h.
        soft = np.concatenate([rng.standard_normal((d, d)) * 0.02, np.eye(d)], axis=0).astype(self.dtype)
        self._add("soft.weight", Tensor(soft, requires_grad=True))
        self._add("soft.bias", parameter((d,), rng, std=0.0, dtype=self.dtype))

    # Introspection
    @property
    def vocab_size(self) -> int:
        assert self.config.vocab_size is not None
        return self.config.vocab_size

    @property
    def layers(self) -> int:
        return self.config.layers

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_dict(self) -> dict[str, Array]:
        """Name -> array copy, in construction order."""
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: Mapping[str, Array]) -> None:
        """Replace every parameter; names, shapes and dtypes must match exactly."""
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ContractError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, array in state.items():
            param = self.params[name]
            if array.shape != param.shape:
                raise ShapeError(f"load_state_dict[{name}]", param.shape, array.shape)
            param.data = np.array(array, dtype=self.dtype, copy=True)

    def train(self) -> Model:
        self.training = True
        return self

    def eval(self) -> Model:
        self.training = False
        return self

    # Building blocks
    def _p(self, name: str) -> Tensor:
        return self.params[name]

    def _dropout(self, x: Tensor) -> Tensor:
        if not self.training or self.config.dropout <= 0.0:
            return x
        return dropout(x, self.config.dropout, self._dropout_rng)

    def _norm(self, x: Tensor, name: str) -> Tensor:
        return layer_norm(x, self._p(f"{name}.gain"), self._p(f"{name}.bias"))

    def _linear(self, x: Tensor, name: str) -> Tensor:
        out = x @ self._p(f"{name}.weight")
        bias = self.params.get(f"{name}.bias")
        return out + bias if bias is not None else out

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.config.heads, self.config.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, x: Tensor) -> Tensor:
        batch, _, length, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(batch, length, self.config.d_model)

    def _attend(self, query: Tensor, key: Tensor, value: Tensor, bias: Array | None) -> Tensor:
        scores = (query @ key.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.config.head_dim))
        if bias is not None:
            scores = scores + Tensor(bias.astype(self.dtype))
        return softmax(scores, axis=-1) @ value

    def _feed_forward(self, x: Tensor, name: str) -> Tensor:
        return self._linear(gelu(self._linear(self._norm(x, f"{name}.ffn_norm"), f"{name}.ffn.up")), f"{name}.ffn.down")

    @staticmethod
    def _padding_bias(mask: Array) -> Array:
        return np.where(mask, 0.0, _NEG_INF)[:, None, None, :]

    @staticmethod
    def _causal_bias(length: int) -> Array:
        return np.triu(np.full((length, length), _NEG_INF), k=1)

    def _embed(self, ids: Array, position_table: str) -> Tensor:
        length = ids.shape[1]
        return take(self._p("embed.token"), ids) + self._p(position_table)[:length]

    # Encoder
    def encode(self, sources: Sequence[Sequence[int]]) -> EncoderStates:
        """Encode a batch of token-id sequences into final hidden states S (eval mode is deterministic)."""
        limit = self.config.max_source_len
        truncated = False
        rows: list[list[int]] = []
        for source in sources:
            ids = [int(i) for i in source]
            if not ids:
                raise ContractError("encode needs a non-empty source")
            bad = [i for i in ids if i < 0 or i >= self.vocab_size]
            if bad:
                raise TokenIndexError(bad[0], self.vocab_size)
            if len(ids) > limit:
                logger.warning(f"Source of {len(ids)} tokens truncated to max_source_len={limit}")
                ids, truncated = ids[:limit], True
            rows.append(ids)
        if not rows:
            raise ContractError("encode needs at least one source")

        width = max(len(r) for r in rows)
        ids_arr = np.full((len(rows), width), PAD_ID, dtype=np.int64)
        mask = np.zeros((len(rows), width), dtype=bool)
        for b, r in enumerate(rows):
            ids_arr[b, : len(r)] = r
            mask[b, : len(r)] = True
        bias = self._padding_bias(mask)

        with flop_scope(FlopCategory.ENCODER):
            x = self._dropout(self._embed(ids_arr, "encoder.position"))
            for layer in range(1, self.layers + 1):
                name = f"encoder.{layer}"
                h = self._norm(x, f"{name}.self_norm")
                q = self._split_heads(self._linear(h, f"{name}.self_attn.query"))
                k = self._split_heads(self._linear(h, f"{name}.self_attn.key"))
                v = self._split_heads(self._linear(h, f"{name}.self_attn.value"))
                attn = self._linear(self._merge_heads(self._attend(q, k, v, bias)), f"{name}.self_attn.out")
                x = x + self._dropout(attn)
                x = x + self._dropout(self._feed_forward(x, name))
            states = self._norm(x, "encoder.final_norm")
        return EncoderStates(states=states, source_mask=mask, truncated=truncated)

    def encode_one(self, source: Sequence[int]) -> EncoderStates:
        return self.encode([source])

    # Decoder
    def cross_memory(self, encoded: EncoderStates) -> CrossMemory:
        """Cross-attention keys and values of every decoder layer."""
        keys, values = [], []
        with flop_scope(FlopCategory.CROSS_KV):
            for layer in range(1, self.layers + 1):
                name = f"decoder.{layer}.cross_attn"
                keys.append(self._split_heads(self._linear(encoded.states, f"{name}.key")))
                values.append(self._split_heads(self._linear(encoded.states, f"{name}.value")))
        return CrossMemory(keys=keys, values=values, bias=self._padding_bias(encoded.source_mask))

    def decoder_input(self, length: int, batch_size: int = 1) -> Tensor:
        """h^0: Embed(MASK) plus the position embedding at every position."""
        self._check_length(length)
        ids = np.full((batch_size, length), MASK_ID, dtype=np.int64)
        return self._dropout(self._embed(ids, "decoder.position"))

    def decoder_layer(
        self,
        layer: int,
        hidden: Tensor,
        memory: CrossMemory,
        active: Array | None = None,
        causal: bool = False,
    ) -> Tensor:
        """Run decoder layer ``layer`` on hidden [B, T, d].

        When ``active`` lists position indices, only those rows are recomputed; every other
        row is copied unchanged and serves as keys and values for the active rows.
        """
        name = f"decoder.{layer}"
        if active is None:
            with flop_scope(FlopCategory.SELF_ATTN):
                h = self._norm(hidden, f"{name}.self_norm")
                q = self._split_heads(self._linear(h, f"{name}.self_attn.query"))
                k = self._split_heads(self._linear(h, f"{name}.self_attn.key"))
                v = self._split_heads(self._linear(h, f"{name}.self_attn.value"))
                bias = self._causal_bias(hidden.shape[1]) if causal else None
                attn = self._linear(self._merge_heads(self._attend(q, k, v, bias)), f"{name}.self_attn.out")
                x = hidden + self._dropout(attn)
            return self._decoder_tail(layer, x, memory)

        if causal:
            raise ContractError("causal attention is only defined for full-row decoder layers")
        active = np.asarray(active, dtype=np.int64)
        if active.size == 0:
            return hidden
        frozen = np.setdiff1d(np.arange(hidden.shape[1]), active)
        rows = hidden[:, active]

        with flop_scope(FlopCategory.SELF_ATTN):
            h = self._norm(rows, f"{name}.self_norm")
            q = self._split_heads(self._linear(h, f"{name}.self_attn.query"))
            k = self._split_heads(self._linear(h, f"{name}.self_attn.key"))
            v = self._split_heads(self._linear(h, f"{name}.self_attn.value"))
        if frozen.size:
            # Attention is order-free over keys, so frozen rows can simply be appended.
            with flop_scope(FlopCategory.FROZEN_KV):
                hf = self._norm(hidden[:, frozen], f"{name}.self_norm")
                k = concat([k, self._split_heads(self._linear(hf, f"{name}.self_attn.key"))], axis=2)
                v = concat([v, self._split_heads(self._linear(hf, f"{name}.self_attn.value"))], axis=2)
        with flop_scope(FlopCategory.SELF_ATTN):
            attn = self._linear(self._merge_heads(self._attend(q, k, v, None)), f"{name}.self_attn.out")
            x = rows + self._dropout(attn)
        x = self._decoder_tail(layer, x, memory)
        return index_update(hidden, (slice(None), active), x)

    def _decoder_tail(self, layer: int, x: Tensor, memory: CrossMemory) -> Tensor:
        name = f"decoder.{layer}"
        with flop_scope(FlopCategory.CROSS_ATTN):
            q = self._split_heads(self._linear(self._norm(x, f"{name}.cross_norm"), f"{name}.cross_attn.query"))
            ctx = self._attend(q, memory.keys[layer - 1], memory.values[layer - 1], memory.bias)
            x = x + self._dropout(self._linear(self._merge_heads(ctx), f"{name}.cross_attn.out"))
        with flop_scope(FlopCategory.FFN):
            x = x + self._dropout(self._feed_forward(x, name))
        return x

    def decode_full(self, encoded: EncoderStates, length: int) -> list[Tensor]:
        """Full-depth NAR forward: hidden states [B, T, d] of every layer."""
        memory = self.cross_memory(encoded)
        h = self.decoder_input(length, encoded.batch_size)
        hidden = []
        for layer in range(1, self.layers + 1):
            h = self.decoder_layer(layer, h, memory)
            hidden.append(h)
        return hidden

    def decode_with_exits(self, encoded: EncoderStates, length: int, exits: ExitAssignment) -> DecoderTrace:
        """NAR forward where position t stops at layer l_t and is copied upward from there."""
        if encoded.batch_size != 1:
            raise ContractError(f"decode_with_exits takes a single source, got a batch of {encoded.batch_size}")
        self._check_length(length)
        exits.check(self.layers, length)
        exit_array = exits.as_array()

        memory = self.cross_memory(encoded)
        h = self.decoder_input(length)
        hidden: list[Tensor] = []
        order: list[Array] = []
        pieces: list[Tensor] = []
        for layer in range(1, self.layers + 1):
            active = np.flatnonzero(exit_array >= layer)
            h = self.decoder_layer(layer, h, memory, None if active.size == length else active)
            hidden.append(h)
            leaving = np.flatnonzero(exit_array == layer)
            if leaving.size:
                order.append(leaving)
                pieces.append(self.off_ramp_logits(h[0, leaving], layer))

        inverse = np.argsort(np.concatenate(order), kind="stable")
        exit_logits = concat(pieces, axis=0)[inverse]
        return DecoderTrace(hidden=hidden, exit_logits=exit_logits, exits=exits)

    def decode_soft(self, encoded: EncoderStates, length: int) -> SoftDecodeOutput:
        """Prediction-feedback forward: each layer's argmax embedding is fused into the next layer's input."""
        memory = self.cross_memory(encoded)
        h = self.decoder_input(length, encoded.batch_size)
        layer_logits: list[Tensor] = []
        feedback: list[Array] = []
        for layer in range(1, self.layers + 1):
            h = self.decoder_layer(layer, h, memory)
            logits = self.off_ramp_logits(h, layer)
            layer_logits.append(logits)
            if layer < self.layers:
                tokens = np.argmax(logits.data, axis=-1)
                feedback.append(tokens)
                with flop_scope(FlopCategory.SOFT_FEEDBACK):
                    fused = concat([take(self._p("embed.token"), tokens), h], axis=-1)
                    h = self._linear(fused, "soft")
        return SoftDecodeOutput(layer_logits=layer_logits, feedback_tokens=feedback)

    def decode_ar_reference(self, encoded: EncoderStates, length: int, stop_at_eos: bool = True) -> ArDecodeResult:
        """Greedy left-to-right decode with causal self-attention, re-running the whole prefix every step."""
        if encoded.batch_size != 1:
            raise ContractError(f"decode_ar_reference takes a single source, got a batch of {encoded.batch_size}")
        self._check_length(length)
        memory = self.cross_memory(encoded)
        tokens: list[int] = []
        passes = 0
        for _ in range(length):
            ids = np.asarray([[BOS_ID, *tokens]], dtype=np.int64)
            x = self._dropout(self._embed(ids, "decoder.position"))
            for layer in range(1, self.layers + 1):
                x = self.decoder_layer(layer, x, memory, causal=True)
            passes += 1
            logits = self.off_ramp_logits(x[:, -1], self.layers)
            next_id = int(np.argmax(logits.data[0]))
            tokens.append(next_id)
            if stop_at_eos and next_id == EOS_ID:
                break
        return ArDecodeResult(raw_ids=tokens, decoder_passes=passes)

    # Off-ramps
    def _ramp_prefix(self, layer: int) -> str:
        return "ramp" if self.config.share_off_ramps else f"ramp.{layer}"

    def ramp_weight(self, layer: int) -> Tensor:
        """W_c^l; the same tensor for every layer when off-ramps are shared."""
        self._check_layer(layer)
        return self._p(f"{self._ramp_prefix(layer)}.weight")

    def off_ramp_logits(self, hidden: Tensor, layer: int) -> Tensor:
        """Logits of off-ramp ``layer`` for hidden [..., d]."""
        self._check_layer(layer)
        if hidden.ndim == 1:
            hidden = hidden.reshape(1, hidden.shape[0])
        prefix = self._ramp_prefix(layer)
        with flop_scope(FlopCategory.OFF_RAMP):
            return self._linear(self._norm(hidden, f"{prefix}.norm"), prefix)

    def off_ramp_predict(self, hidden: Tensor, layer: int) -> Tensor:
        """Distribution over the vocabulary from off-ramp ``layer``; hidden may be [d] or [n, d]."""
        probs = softmax(self.off_ramp_logits(hidden, layer), axis=-1)
        return probs[0] if hidden.ndim == 1 else probs

    # Checks
    def _check_layer(self, layer: int) -> None:
        if not 1 <= layer <= self.layers:
            raise ContractError(f"layer must lie in [1, {self.layers}], got {layer}")

    def _check_length(self, length: int) -> None:
        if not 1 <= length <= self.config.max_target_len:
            raise ContractError(f"decode length must lie in [1, {self.config.max_target_len}], got {length}")

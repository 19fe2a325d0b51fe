import json

import numpy as np

from focused_reading.corpus import Document, Mention, tokenize

# filled by the acceptance suite, printed by the terminal summary hook
ACCEPTANCE_RESULTS = []


def make_doc(doc_id, mentions, n_sentences=None, text=None, label=None):
    """mentions: iterable of (entity, sentence_index)."""
    mentions = [Mention(e, e, s) for e, s in mentions]
    n = n_sentences if n_sentences is not None else max([m.sentence for m in mentions], default=0) + 1
    sentences = tuple(tuple(tokenize(text or f"filler words {doc_id}")) for _ in range(n))
    return Document(doc_id, doc_id, sentences, tuple(mentions), label)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def reference_loss(net, batch, advantages, value_coef, entropy_coef, seed, training):
    """Forward-only A2C loss computed straight from the output distribution."""
    rng = np.random.default_rng(seed) if training else None
    probs, values, _ = net.forward(batch.features, batch.masks, training=training, rng=rng)
    rows = np.arange(len(batch.actions))
    chosen = np.log(probs[rows, batch.actions])
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
    ent = -plogp.sum(axis=1)
    return (-(chosen * advantages).mean() + value_coef * ((values - batch.returns) ** 2).mean()
            - entropy_coef * ent.mean())


def random_gradcheck_case(rng):
    """A small random network, batch and loss weighting."""
    from focused_reading.agent import ActorCriticNet, Batch
    from focused_reading.environment import feature_layout

    d, n = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    layout = feature_layout(d, n)
    input_dim, num_actions = layout["topic"][1], 3 * n + 1
    hidden = tuple(int(h) for h in rng.integers(2, 8, size=int(rng.integers(1, 4))))
    net = ActorCriticNet(
        input_dim, num_actions, hidden,
        dropout=float(rng.choice([0.0, 0.2, 0.5])),
        embedding_dropout=float(rng.choice([0.0, 0.2, 0.5])),
        embedding_span=layout["embeddings"],
        input_transform=str(rng.choice(["symlog", "none"])),
        rng=rng,
    )
    N = int(rng.integers(1, 7))
    masks = rng.random((N, num_actions)) < 0.6
    masks[np.arange(N), rng.integers(0, num_actions, N)] = True
    actions = np.array([rng.choice(np.flatnonzero(m)) for m in masks])
    batch = Batch(rng.normal(size=(N, input_dim)) * 2.0, masks, actions, rng.normal(size=N))
    advantages = rng.normal(size=N)
    return net, batch, advantages, float(rng.uniform(0.1, 1.0)), float(rng.uniform(0.0, 0.1))


def gradcheck(net, batch, advantages, value_coef, entropy_coef, seed=0, training=True, h=1e-5):
    """Relative error between analytic and central-difference gradients over all parameters."""
    from focused_reading.agent import a2c_loss_and_grads

    rng = np.random.default_rng(seed) if training else None
    _, grads = a2c_loss_and_grads(net, batch, value_coef, entropy_coef, rng=rng, training=training,
                                  advantages=advantages)
    num, ana = [], []
    for name, p in net.params.items():
        flat = p.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = reference_loss(net, batch, advantages, value_coef, entropy_coef, seed, training)
            flat[i] = old - h
            down = reference_loss(net, batch, advantages, value_coef, entropy_coef, seed, training)
            flat[i] = old
            num.append((up - down) / (2 * h))
        ana.append(grads[name].reshape(-1))
    num, ana = np.array(num), np.concatenate(ana)
    return float(np.linalg.norm(num - ana) / max(np.linalg.norm(num) + np.linalg.norm(ana), 1e-12))

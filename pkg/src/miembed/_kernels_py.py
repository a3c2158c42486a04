"""Pure NumPy implementation of the per-bag hot kernels.

Mirrors the compiled extension ``miembed._kernels`` and is used as the
fallback backend when the extension is not built. Both backends share
the exact same call signatures and return conventions, so they are
interchangeable behind :mod:`miembed.kernels`.

Conventions shared with the compiled backend:

- ``status`` return values are -1 on success, otherwise the index of the
  first instance whose pre-normalization vector has zero norm.
- distance ties between instances resolve to the lowest instance index.
- a hinge term contributes only when strictly positive.
"""

import numpy as np


def embed_features(weight, feats):
    """Map feature rows through the linear weight and L2-normalize.

    Returns ``(status, emb, norms)`` where ``emb[i]`` is the unit
    embedding of ``feats[i]`` and ``norms[i]`` the pre-normalization
    Euclidean norm. On failure returns ``(bad_index, None, None)``.
    """
    pre = feats @ weight.T
    norms = np.sqrt(np.einsum("ij,ij->i", pre, pre))
    if not np.all(norms > 0.0):
        bad = int(np.flatnonzero(~(norms > 0.0))[0])
        return bad, None, None
    return -1, pre / norms[:, None], norms


def min_label_distances(weight, feats, labels):
    """Per-label minimum squared distance over all instance embeddings.

    Returns ``(status, dmin, argmin)``; ``dmin[t]`` is the smallest
    squared distance from any instance embedding to label vector ``t``
    and ``argmin[t]`` the lowest instance index attaining it.
    """
    status, emb, _ = embed_features(weight, feats)
    if status >= 0:
        return status, None, None
    diff = emb[:, None, :] - labels[None, :, :]
    dists = np.einsum("itd,itd->it", diff, diff)
    argmin = dists.argmin(axis=0)
    dmin = dists[argmin, np.arange(dists.shape[1])]
    return -1, dmin, argmin.astype(np.intp)


def ranking_loss_grad(
    weight,
    feats,
    labels,
    pos,
    neg,
    margin,
    whole_image_only,
    rank_weighted,
    exclude_positives,
    force_unit_weights,
    grad_out,
):
    """Pairwise hinge ranking loss and its subgradient for one bag.

    ``pos``/``neg`` are disjoint label index arrays. With
    ``whole_image_only`` the per-label distance uses instance 0 only,
    otherwise the minimum over all instances. With ``rank_weighted``
    each positive's hinge row is scaled by the rank weight (1 while the
    positive ranks inside the top ``len(pos)``, its rank count
    otherwise); ``force_unit_weights`` keeps that code path but pins
    every weight to 1. The subgradient is accumulated into ``grad_out``
    (overwritten) and flows only through each term's argmin instance.

    Returns ``(status, value)``.
    """
    grad_out[:] = 0.0
    status, emb, norms = embed_features(weight, feats)
    if status >= 0:
        return status, 0.0

    num_labels = labels.shape[0]
    if whole_image_only:
        diff = emb[0, None, :] - labels
        dmin = np.einsum("td,td->t", diff, diff)
        argmin = np.zeros(num_labels, dtype=np.intp)
    else:
        diff = emb[:, None, :] - labels[None, :, :]
        dists = np.einsum("itd,itd->it", diff, diff)
        argmin = dists.argmin(axis=0).astype(np.intp)
        dmin = dists[argmin, np.arange(num_labels)]

    num_pos = pos.shape[0]
    if rank_weighted:
        dpos = dmin[pos]
        if exclude_positives:
            cand = np.ones(num_labels, dtype=bool)
            cand[pos] = False
            ranks = (dmin[cand][None, :] <= dpos[:, None]).sum(axis=1)
        else:
            # the <= count includes the positive itself; drop it
            ranks = (dmin[None, :] <= dpos[:, None]).sum(axis=1) - 1
        weights = np.where(ranks < num_pos, 1.0, ranks.astype(np.float64))
        if force_unit_weights:
            weights = np.ones(num_pos)
    else:
        weights = np.ones(num_pos)

    hinges = margin + dmin[pos][:, None] - dmin[neg][None, :]
    active = hinges > 0.0
    value = float(np.sum(np.where(active, weights[:, None] * hinges, 0.0)))

    alpha = np.zeros(num_labels)
    act = active.astype(np.float64)
    alpha[pos] += weights * act.sum(axis=1)
    alpha[neg] -= (weights[:, None] * act).sum(axis=0)

    touched = np.flatnonzero(alpha)
    if touched.size:
        y = labels[touched]
        c = argmin[touched]
        e = emb[c]
        dots = np.einsum("qd,qd->q", e, y)
        contrib = (alpha[touched] * 2.0 / norms[c])[:, None] * (dots[:, None] * e - y)
        per_instance = np.zeros_like(emb)
        np.add.at(per_instance, c, contrib)
        grad_out += per_instance.T @ feats
    return -1, value

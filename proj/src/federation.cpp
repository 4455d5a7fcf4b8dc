#include "fedproc/federation.hpp"

#include "fedproc/errors.hpp"
#include "fedproc/losses.hpp"
#include "fedproc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace fedproc {

Strategy strategy_from_string(const std::string& s) {
    if (s == "fedproc") return Strategy::fedproc;
    if (s == "fedavg") return Strategy::fedavg;
    if (s == "solo") return Strategy::solo;
    throw config_error("unknown strategy '" + s + "' (expected fedproc, fedavg, or solo)");
}

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::fedproc: return "fedproc";
    case Strategy::fedavg: return "fedavg";
    case Strategy::solo: return "solo";
    }
    return "?";
}

namespace {

// Stacks the listed samples into one batch tensor, flattening each sample when the
// encoder takes flat inputs.
Tensor gather_batch(const NetworkSpec& spec, const LabeledDataset& data,
                    const std::vector<std::size_t>& indices) {
    const Tensor& first = data.features[indices[0]];
    std::vector<std::size_t> shape{indices.size()};
    if (spec.encoder == EncoderKind::mlp) {
        shape.push_back(first.size());
    } else {
        shape.insert(shape.end(), first.shape.begin(), first.shape.end());
    }
    Tensor batch(shape);
    const std::size_t stride = first.size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Tensor& f = data.features[indices[i]];
        std::copy(f.data.begin(), f.data.end(), batch.data.begin() + i * stride);
    }
    return batch;
}

std::vector<int> gather_labels(const LabeledDataset& data,
                               const std::vector<std::size_t>& indices) {
    std::vector<int> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        labels[i] = data.labels[indices[i]];
    }
    return labels;
}

// Indices of `updates` in ascending client id; aggregation always walks this
// order, so the result is independent of how updates arrived.
std::vector<std::size_t> canonical_order(const std::vector<ClientUpdate>& updates) {
    std::vector<std::size_t> order(updates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return updates[a].client_id < updates[b].client_id;
    });
    return order;
}

} // namespace

PrototypeSet compute_prototypes(const NetworkSpec& spec, const ModelParameters& params,
                                const ClientDataset& ds) {
    if (ds.size() == 0) {
        throw usage_error("compute_prototypes on an empty client dataset");
    }
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), 0);
    const Tensor z = extract_representation(spec, params, gather_batch(spec, ds.data, all));
    const std::size_t q = z.dim(1);
    PrototypeSet protos(ds.data.num_classes, q);
    for (std::size_t k = 0; k < ds.per_class_index.size(); ++k) {
        const auto& members = ds.per_class_index[k];
        if (members.empty()) continue;
        Tensor& c = protos.vectors[k];
        for (const std::size_t i : members) {
            for (std::size_t d = 0; d < q; ++d) {
                c[d] += z.at(i, d);
            }
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t d = 0; d < q; ++d) {
            c[d] *= inv;
        }
        protos.present[k] = true;
    }
    return protos;
}

PrototypeSet aggregate_prototype_sets(const std::vector<const PrototypeSet*>& sets) {
    if (sets.empty()) {
        throw protocol_error("prototype aggregation needs at least one contribution");
    }
    const std::size_t k_count = sets.front()->num_classes();
    const std::size_t q = sets.front()->dim;
    for (const auto* s : sets) {
        if (s->num_classes() != k_count || s->dim != q) {
            throw protocol_error("prototype sets disagree on class count or dimension");
        }
    }
    PrototypeSet out(k_count, q);
    for (std::size_t k = 0; k < k_count; ++k) {
        std::size_t contributors = 0;
        Tensor& acc = out.vectors[k];
        for (const auto* s : sets) {
            if (!s->present[k]) continue;
            ++contributors;
            for (std::size_t d = 0; d < q; ++d) {
                acc[d] += s->vectors[k][d];
            }
        }
        if (contributors == 0) {
            throw protocol_error("class " + std::to_string(k) +
                                 " has no prototype from any participant");
        }
        const double inv = 1.0 / static_cast<double>(contributors);
        for (std::size_t d = 0; d < q; ++d) {
            acc[d] *= inv;
        }
        out.present[k] = true;
    }
    return out;
}

PrototypeSet aggregate_prototypes(const std::vector<ClientUpdate>& updates) {
    const auto order = canonical_order(updates);
    std::vector<const PrototypeSet*> sets;
    sets.reserve(updates.size());
    for (const std::size_t i : order) {
        sets.push_back(&updates[i].prototypes);
    }
    return aggregate_prototype_sets(sets);
}

ModelParameters aggregate_weights(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) {
        throw protocol_error("weight aggregation needs at least one update");
    }
    const auto order = canonical_order(updates);
    std::size_t total = 0;
    for (const auto& u : updates) {
        if (!u.params.same_layout(updates.front().params)) {
            throw protocol_error("client " + std::to_string(u.client_id) +
                                 " returned parameters with a different layout");
        }
        total += u.num_samples;
    }
    if (total == 0) {
        throw protocol_error("weight aggregation with zero total samples");
    }
    // Accumulated as anchor + sum_i p_i * (w_i - anchor): algebraically the same
    // convex combination, and bit-exact when every update is identical (the eta=0
    // fixed point).
    const ModelParameters& anchor = updates[order[0]].params;
    ModelParameters out = anchor;
    for (const std::size_t i : order) {
        const ClientUpdate& u = updates[i];
        const double w = static_cast<double>(u.num_samples) / static_cast<double>(total);
        for (std::size_t e = 0; e < out.entries.size(); ++e) {
            auto& dst = out.entries[e].tensor.data;
            const auto& src = u.params.entries[e].tensor.data;
            const auto& base = anchor.entries[e].tensor.data;
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] += w * (src[j] - base[j]);
            }
        }
    }
    return out;
}

std::vector<int> sample_clients(std::size_t num_clients, double gamma,
                                std::uint64_t round_seed) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw config_error("sampling rate must lie in (0,1], got " + std::to_string(gamma));
    }
    if (num_clients == 0) {
        throw usage_error("sampling from zero clients");
    }
    std::vector<int> pool(num_clients);
    std::iota(pool.begin(), pool.end(), 0);
    const auto want = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(gamma * static_cast<double>(num_clients))));
    if (want >= num_clients) {
        return pool;
    }
    Rng rng(round_seed);
    for (std::size_t i = 0; i < want; ++i) {
        std::swap(pool[i], pool[i + rng.index(num_clients - i)]);
    }
    pool.resize(want);
    std::sort(pool.begin(), pool.end());
    return pool;
}

ClientUpdate client_local_training(int client_id, std::size_t t, const NetworkSpec& spec,
                                   const ModelParameters& global_params,
                                   const PrototypeSet& global_prototypes,
                                   const ClientDataset& ds, const TrainingConfig& cfg) {
    if (cfg.local_epochs == 0) {
        throw config_error("local training needs at least one epoch");
    }
    if (cfg.learning_rate < 0.0) {
        throw config_error("learning rate must be non-negative");
    }
    if (ds.size() == 0) {
        throw usage_error("client " + std::to_string(client_id) + " has no data");
    }
    double blend = 0.0; // weight on the contrastive term
    Tensor proto_matrix;
    if (cfg.strategy == Strategy::fedproc) {
        blend = cfg.alpha_override ? *cfg.alpha_override : alpha_schedule(t, cfg.total_rounds);
        if (blend < 0.0 || blend > 1.0) {
            throw config_error("alpha override must lie in [0,1]");
        }
        if (blend > 0.0) {
            proto_matrix = global_prototypes.to_matrix(); // incomplete set -> protocol error
        }
    }

    ModelParameters local = global_params;
    Rng stream(mix_seed(cfg.seed, stream::client, t, static_cast<std::uint64_t>(client_id)));
    double final_epoch_loss = 0.0;

    try {
        for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
            const std::uint64_t epoch_seed = stream.next_u64();
            const bool final_epoch = epoch + 1 == cfg.local_epochs;
            double loss_sum = 0.0;
            for (const auto& batch : batches(ds, cfg.batch_size, epoch_seed)) {
                Graph g;
                NetworkGraph net =
                    build_forward_graph(g, spec, local, gather_batch(spec, ds.data, batch));
                const auto labels = gather_labels(ds.data, batch);
                Graph::Value loss;
                if (blend == 0.0) {
                    loss = g.cross_entropy_mean(net.s, labels);
                } else if (blend == 1.0) {
                    loss = g.gpc_mean(net.z, labels, proto_matrix);
                } else {
                    loss = g.add(g.scale(g.gpc_mean(net.z, labels, proto_matrix), blend),
                                 g.scale(g.cross_entropy_mean(net.s, labels), 1.0 - blend));
                }
                if (final_epoch) {
                    loss_sum += g.value(loss).data[0] * static_cast<double>(batch.size());
                }
                if (cfg.learning_rate > 0.0) {
                    g.backward(loss);
                    sgd_step_inplace(local, collect_gradients(g, net), cfg.learning_rate);
                }
            }
            if (final_epoch) {
                final_epoch_loss = loss_sum / static_cast<double>(ds.size());
            }
        }
    } catch (const degenerate_input_error& e) {
        throw degenerate_input_error("client " + std::to_string(client_id) + " round " +
                                     std::to_string(t) + ": " + e.what());
    }

    ClientUpdate update;
    update.client_id = client_id;
    update.prototypes = compute_prototypes(spec, local, ds);
    update.params = std::move(local);
    update.num_samples = ds.size();
    update.mean_train_loss = final_epoch_loss;
    return update;
}

double evaluate(const NetworkSpec& spec, const ModelParameters& params,
                const LabeledDataset& test) {
    if (test.size() == 0) {
        throw usage_error("evaluation on an empty test set");
    }
    constexpr std::size_t kChunk = 512;
    std::size_t correct = 0;
    std::vector<std::size_t> indices;
    for (std::size_t start = 0; start < test.size(); start += kChunk) {
        const std::size_t end = std::min(test.size(), start + kChunk);
        indices.resize(end - start);
        std::iota(indices.begin(), indices.end(), start);
        const Tensor logits =
            forward_full(spec, params, gather_batch(spec, test, indices)).s;
        const std::size_t k = logits.dim(1);
        for (std::size_t r = 0; r < logits.dim(0); ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < k; ++c) {
                if (logits.at(r, c) > logits.at(r, best)) {
                    best = c;
                }
            }
            if (static_cast<int>(best) == test.labels[indices[r]]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

SoloAccuracy evaluate_solo(const NetworkSpec& spec, const std::vector<ModelParameters>& models,
                           const LabeledDataset& test) {
    if (models.empty()) {
        throw usage_error("solo evaluation without models");
    }
    std::vector<double> acc;
    acc.reserve(models.size());
    for (const auto& m : models) {
        acc.push_back(evaluate(spec, m, test));
    }
    SoloAccuracy out;
    out.mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    double ss = 0.0;
    for (double a : acc) {
        ss += (a - out.mean) * (a - out.mean);
    }
    out.stddev = std::sqrt(ss / static_cast<double>(acc.size()));
    return out;
}

PrototypeSet initial_prototypes(const NetworkSpec& spec, const ModelParameters& params,
                                const std::vector<ClientDataset>& clients) {
    std::vector<PrototypeSet> sets;
    sets.reserve(clients.size());
    for (const auto& c : clients) {
        sets.push_back(compute_prototypes(spec, params, c));
    }
    std::vector<const PrototypeSet*> refs;
    refs.reserve(sets.size());
    for (const auto& s : sets) {
        refs.push_back(&s);
    }
    return aggregate_prototype_sets(refs);
}

namespace {

// Trains the given clients against one immutable snapshot, optionally across
// worker threads. Results land in slots indexed by position, so the outcome is
// identical however the work is scheduled; per-client RNG streams are derived
// from (seed, round, client id), never from the executing thread.
std::vector<ClientUpdate> train_clients(const std::vector<int>& ids, std::size_t t,
                                        const NetworkSpec& spec,
                                        const ModelParameters& global_params,
                                        const PrototypeSet& global_prototypes,
                                        const std::vector<ClientDataset>& clients,
                                        const TrainingConfig& cfg,
                                        const std::vector<ModelParameters>* solo_params) {
    std::vector<ClientUpdate> updates(ids.size());
    std::vector<std::exception_ptr> failures(ids.size());
    auto work = [&](std::size_t slot) {
        const int id = ids[slot];
        const ModelParameters& start =
            solo_params ? (*solo_params)[static_cast<std::size_t>(id)] : global_params;
        updates[slot] = client_local_training(id, t, spec, start, global_prototypes,
                                              clients[static_cast<std::size_t>(id)], cfg);
    };
    std::size_t nthreads = cfg.threads == 0
                               ? std::max(1u, std::thread::hardware_concurrency())
                               : cfg.threads;
    nthreads = std::min(nthreads, ids.size());
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            work(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(nthreads);
        for (std::size_t w = 0; w < nthreads; ++w) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t slot = next.fetch_add(1);
                    if (slot >= ids.size()) return;
                    try {
                        work(slot);
                    } catch (...) {
                        failures[slot] = std::current_exception();
                    }
                }
            });
        }
        for (auto& w : workers) {
            w.join();
        }
        for (const auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
    }
    return updates;
}

double weighted_mean_loss(const std::vector<ClientUpdate>& updates) {
    double loss = 0.0;
    std::size_t total = 0;
    for (const auto& u : updates) {
        loss += u.mean_train_loss * static_cast<double>(u.num_samples);
        total += u.num_samples;
    }
    return loss / static_cast<double>(total);
}

} // namespace

RoundMetrics run_round(std::size_t t, FederationState& state, const NetworkSpec& spec,
                       const std::vector<ClientDataset>& clients, const LabeledDataset& test,
                       const TrainingConfig& cfg) {
    if (t >= cfg.total_rounds) {
        throw usage_error("round " + std::to_string(t) + " outside the schedule of " +
                          std::to_string(cfg.total_rounds));
    }
    RoundMetrics metrics;
    metrics.round = t;
    metrics.alpha = alpha_schedule(t, cfg.total_rounds);
    try {
        if (cfg.strategy == Strategy::solo) {
            if (state.solo_params.empty()) {
                state.solo_params.assign(clients.size(), state.global_params);
            }
            std::vector<int> all(clients.size());
            std::iota(all.begin(), all.end(), 0);
            auto updates = train_clients(all, t, spec, state.global_params,
                                         state.global_prototypes, clients, cfg,
                                         &state.solo_params);
            for (auto& update : updates) {
                state.solo_params[static_cast<std::size_t>(update.client_id)] =
                    std::move(update.params);
            }
            metrics.mean_train_loss = weighted_mean_loss(updates);
            metrics.top1_accuracy = evaluate_solo(spec, state.solo_params, test).mean;
            metrics.participating_clients = std::move(all);
        } else {
            const auto sampled = sample_clients(
                clients.size(), cfg.sample_rate, mix_seed(cfg.seed, stream::sample, t));
            const auto updates = train_clients(sampled, t, spec, state.global_params,
                                               state.global_prototypes, clients, cfg, nullptr);
            state.global_prototypes = aggregate_prototypes(updates);
            state.global_params = aggregate_weights(updates);
            metrics.mean_train_loss = weighted_mean_loss(updates);
            metrics.top1_accuracy = evaluate(spec, state.global_params, test);
            metrics.participating_clients = sampled;
        }
    } catch (const protocol_error& e) {
        throw protocol_error("round " + std::to_string(t) + ": " + e.what());
    }
    return metrics;
}

} // namespace fedproc

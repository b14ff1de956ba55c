#include "ohprl/replay.hpp"

#include "ohprl/intervention.hpp"

namespace ohprl {

void prefill(BufferPair& buffers, const std::vector<Episode>& demos, const std::vector<Episode>& rollouts,
             Rng& rng) {
    for (std::size_t k = 0; k < demos.size(); ++k) {
        const auto& ep = demos[k];
        if (!ep.success || ep.steps.empty() || ep.steps.back().done < 1.0) {
            throw ValidationError("demo episode " + std::to_string(k) + " does not end in task success");
        }
    }
    for (const auto& ep : demos) {
        for (const auto& s : ep.steps) {
            buffers.pref.push(
                make_preference_tuple(s.state, s.action, std::nullopt, s.reward, s.done, s.next_state, rng));
        }
    }
    for (const auto& ep : rollouts) {
        for (const auto& s : ep.steps) {
            buffers.online.push(Transition{s.state, s.action, s.reward, s.done, s.next_state});
        }
    }
}

SymmetricSample sample_symmetric(const BufferPair& buffers, std::size_t n, Rng& rng) {
    SymmetricSample out;
    out.online = buffers.online.sample(n, rng, "online buffer");
    out.pref = buffers.pref.sample(n, rng, "preference buffer");
    return out;
}

std::vector<Transition> build_base_batch(const std::vector<Transition>& online,
                                         const std::vector<PreferenceTuple>& pref) {
    std::vector<Transition> base;
    base.reserve(online.size() + pref.size());
    base.insert(base.end(), online.begin(), online.end());
    for (const auto& t : pref) base.push_back(Transition{t.state, t.preferred, t.reward, t.done, t.next_state});
    return base;
}

TransitionBatch stack(const std::vector<Transition>& items) {
    TransitionBatch b;
    const auto n = static_cast<Eigen::Index>(items.size());
    if (n == 0) return b;
    const auto sd = items.front().state.size();
    const auto ad = items.front().action.size();
    b.states.resize(sd, n);
    b.actions.resize(ad, n);
    b.rewards.resize(n);
    b.dones.resize(n);
    b.next_states.resize(sd, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& t = items[static_cast<std::size_t>(c)];
        if (t.state.size() != sd || t.action.size() != ad || t.next_state.size() != sd) {
            throw ShapeError("inconsistent transition widths in batch");
        }
        b.states.col(c) = t.state;
        b.actions.col(c) = t.action;
        b.rewards(c) = t.reward;
        b.dones(c) = t.done;
        b.next_states.col(c) = t.next_state;
    }
    return b;
}

PreferenceBatch stack(const std::vector<PreferenceTuple>& items) {
    PreferenceBatch b;
    const auto n = static_cast<Eigen::Index>(items.size());
    if (n == 0) return b;
    const auto sd = items.front().state.size();
    const auto ad = items.front().preferred.size();
    b.states.resize(sd, n);
    b.preferred.resize(ad, n);
    b.weak.resize(ad, n);
    b.rewards.resize(n);
    b.dones.resize(n);
    b.next_states.resize(sd, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const auto& t = items[static_cast<std::size_t>(c)];
        if (t.state.size() != sd || t.preferred.size() != ad || t.weak.size() != ad) {
            throw ShapeError("inconsistent preference tuple widths in batch");
        }
        b.states.col(c) = t.state;
        b.preferred.col(c) = t.preferred;
        b.weak.col(c) = t.weak;
        b.rewards(c) = t.reward;
        b.dones(c) = t.done;
        b.next_states.col(c) = t.next_state;
    }
    return b;
}

}  // namespace ohprl

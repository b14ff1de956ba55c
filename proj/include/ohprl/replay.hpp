#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "ohprl/errors.hpp"
#include "ohprl/rng.hpp"
#include "ohprl/transition.hpp"

namespace ohprl {

/// Fixed-capacity FIFO ring buffer guarded by a mutex. One appender and one
/// sampler may interleave; a sample sees the length as of its start.
template <typename T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("buffer capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity, 4096));
    }

    RingBuffer(const RingBuffer& other) {
        std::lock_guard lock(other.mutex_);
        capacity_ = other.capacity_;
        items_ = other.items_;
        head_ = other.head_;
        inserted_ = other.inserted_;
    }

    RingBuffer& operator=(const RingBuffer& other) {
        if (this == &other) return *this;
        std::scoped_lock lock(mutex_, other.mutex_);
        capacity_ = other.capacity_;
        items_ = other.items_;
        head_ = other.head_;
        inserted_ = other.inserted_;
        return *this;
    }

    void push(T item) {
        std::lock_guard lock(mutex_);
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
        ++inserted_;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

    bool empty() const { return size() == 0; }
    std::size_t capacity() const { return capacity_; }

    /// Total insertions ever made (monotone, unaffected by eviction).
    std::uint64_t inserted() const {
        std::lock_guard lock(mutex_);
        return inserted_;
    }

    /// Uniform draws with replacement; the buffer must be non-empty.
    std::vector<T> sample(std::size_t n, Rng& rng, const std::string& name) const {
        std::lock_guard lock(mutex_);
        if (items_.empty()) throw SamplingError(name + " empty");
        std::vector<T> out;
        out.reserve(n);
        const std::size_t len = items_.size();
        for (std::size_t k = 0; k < n; ++k) {
            const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(len));
            out.push_back(items_[std::min(idx, len - 1)]);
        }
        return out;
    }

    /// Items from oldest to newest.
    std::vector<T> snapshot() const {
        std::lock_guard lock(mutex_);
        std::vector<T> out;
        out.reserve(items_.size());
        for (std::size_t k = 0; k < items_.size(); ++k) out.push_back(items_[(head_ + k) % items_.size()]);
        return out;
    }

private:
    std::size_t capacity_ = 0;
    std::vector<T> items_;
    std::size_t head_ = 0;  // oldest item once the buffer is full
    std::uint64_t inserted_ = 0;
    mutable std::mutex mutex_;
};

/// D_online and D_p.
struct BufferPair {
    RingBuffer<Transition> online;
    RingBuffer<PreferenceTuple> pref;

    explicit BufferPair(std::size_t online_capacity = 100000, std::size_t pref_capacity = 100000)
        : online(online_capacity), pref(pref_capacity) {}
};

/// One recorded step of an episode: the executed action plus outcome.
struct EpisodeStep {
    Vector state;
    Vector action;
    double reward = 0.0;
    double done = 0.0;
    Vector next_state;
};

struct Episode {
    std::vector<EpisodeStep> steps;
    bool success = false;
};

/// Demo steps go to D_p with a weak action drawn from the uniform prior (no
/// policy exists yet); rollout steps go to D_online. Throws ValidationError if
/// a demo did not end in success.
void prefill(BufferPair& buffers, const std::vector<Episode>& demos, const std::vector<Episode>& rollouts, Rng& rng);

struct SymmetricSample {
    std::vector<Transition> online;
    std::vector<PreferenceTuple> pref;
};

/// n uniform draws (with replacement) from each buffer.
SymmetricSample sample_symmetric(const BufferPair& buffers, std::size_t n, Rng& rng);

/// B_online followed by (s, a_p, r, d, s') for each preference tuple.
std::vector<Transition> build_base_batch(const std::vector<Transition>& online,
                                         const std::vector<PreferenceTuple>& pref);

/// Column-stacked batch for the learner.
struct TransitionBatch {
    Matrix states;
    Matrix actions;
    Vector rewards;
    Vector dones;
    Matrix next_states;

    Eigen::Index size() const { return states.cols(); }
};

struct PreferenceBatch {
    Matrix states;
    Matrix preferred;
    Matrix weak;
    Vector rewards;
    Vector dones;
    Matrix next_states;

    Eigen::Index size() const { return states.cols(); }
};

TransitionBatch stack(const std::vector<Transition>& items);
PreferenceBatch stack(const std::vector<PreferenceTuple>& items);

}  // namespace ohprl

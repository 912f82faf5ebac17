#include "opaque/memory.hpp"

#include <algorithm>
#include <cmath>

namespace opaque {

MemoryTransducer::MemoryTransducer(std::vector<std::string> names, Index num_states,
                                   Index num_actions)
    : memory_names_(std::move(names)), num_states_(num_states), num_actions_(num_actions) {
  if (memory_names_.empty()) throw ModelError("transducer needs at least one memory state");
  if (num_states <= 0 || num_actions <= 0) throw ModelError("transducer needs states and actions");
  initial_.assign(num_states, Vec::Zero(num_memory()));
  update_.assign(static_cast<std::size_t>(num_memory() * num_states * num_actions * num_states),
                 Vec::Zero(num_memory()));
}

std::size_t MemoryTransducer::slot(Index m, Index s, Index a, Index s_next) const {
  return static_cast<std::size_t>(((m * num_states_ + s) * num_actions_ + a) * num_states_ + s_next);
}

const Vec& MemoryTransducer::update(Index m, Index s, Index a, Index s_next) const {
  return update_[slot(m, s, a, s_next)];
}

MemoryTransducer MemoryTransducer::from_action_update(
    std::vector<std::string> memory_names, Index num_states, Index num_actions,
    const ActionUpdate& update, const std::function<Vec(Index s0)>& initial_memory) {
  MemoryTransducer tr(std::move(memory_names), num_states, num_actions);
  for (Index s = 0; s < num_states; ++s) tr.initial_[s] = initial_memory(s);
  for (Index m = 0; m < tr.num_memory(); ++m) {
    for (Index s = 0; s < num_states; ++s) {
      for (Index a = 0; a < num_actions; ++a) {
        const Vec next = update(m, s, a);
        for (Index s2 = 0; s2 < num_states; ++s2) tr.update_[tr.slot(m, s, a, s2)] = next;
      }
    }
  }
  tr.validate();
  return tr;
}

MemoryTransducer MemoryTransducer::from_state_update(std::vector<std::string> memory_names,
                                                     Index num_states, Index num_actions,
                                                     const StateUpdate& update, Index m0) {
  MemoryTransducer tr(std::move(memory_names), num_states, num_actions);
  const Index k = tr.num_memory();
  auto checked = [k](Index m) {
    if (m < 0 || m >= k) throw ModelError("memory update leaves the memory set");
    return m;
  };
  checked(m0);
  for (Index s = 0; s < num_states; ++s) tr.initial_[s](checked(update(m0, s))) = 1.0;
  for (Index m = 0; m < k; ++m) {
    for (Index s2 = 0; s2 < num_states; ++s2) {
      const Index next = checked(update(m, s2));
      for (Index s = 0; s < num_states; ++s) {
        for (Index a = 0; a < num_actions; ++a) tr.update_[tr.slot(m, s, a, s2)](next) = 1.0;
      }
    }
  }
  return tr;
}

MemoryTransducer MemoryTransducer::time_counter(Index num_memory, Index num_states,
                                                Index num_actions) {
  std::vector<std::string> names;
  for (Index m = 0; m < num_memory; ++m) names.push_back("m" + std::to_string(m));
  return from_action_update(
      std::move(names), num_states, num_actions,
      [num_memory](Index m, Index, Index) {
        Vec next = Vec::Zero(num_memory);
        next(std::min(m + 1, num_memory - 1)) = 1.0;
        return next;
      },
      [num_memory](Index) {
        Vec init = Vec::Zero(num_memory);
        init(0) = 1.0;
        return init;
      });
}

MemoryTransducer MemoryTransducer::trivial(Index num_states, Index num_actions) {
  return time_counter(1, num_states, num_actions);
}

void MemoryTransducer::validate() const {
  auto check = [](const Vec& p) {
    if (!p.allFinite() || (p.array() < 0.0).any() ||
        std::abs(p.sum() - 1.0) > kStochasticTolerance) {
      throw ModelError("memory update is not a distribution");
    }
  };
  for (const auto& p : initial_) check(p);
  for (const auto& p : update_) check(p);
}

ObservationModel AugmentedMdp::lift(const ObservationModel& obs) const {
  ObservationModel out;
  out.observation_names = obs.observation_names;
  out.emission.resize(mdp.num_states(), obs.num_observations());
  for (Index v = 0; v < mdp.num_states(); ++v) out.emission.row(v) = obs.emission.row(base_state[v]);
  return out;
}

SecretClassifier AugmentedMdp::lift(const SecretClassifier& secret) const {
  SecretClassifier out = secret;
  out.label_of_state.resize(mdp.num_states());
  for (Index v = 0; v < mdp.num_states(); ++v) {
    out.label_of_state[v] = secret.label_of_state[base_state[v]];
  }
  return out;
}

AugmentedMdp augment_with_memory(const Mdp& mdp, const MemoryTransducer& transducer,
                                 Index size_cap) {
  const Index n = mdp.num_states();
  const Index na = mdp.num_actions();
  const Index k = transducer.num_memory();
  if (transducer.num_states() != n || transducer.num_actions() != na) {
    throw ModelError("transducer dimensions differ from the MDP");
  }
  if (n * k > size_cap) {
    throw ModelError("augmented state space has " + std::to_string(n * k) +
                     " states, above the cap of " + std::to_string(size_cap));
  }
  AugmentedMdp out;
  out.num_memory = k;
  const Index size = n * k;
  Mdp& aug = out.mdp;
  aug.action_names = mdp.action_names;
  aug.discount = mdp.discount;
  aug.state_names.resize(size);
  out.base_state.resize(size);
  out.memory.resize(size);
  aug.initial = Vec::Zero(size);
  aug.reward = Mat::Zero(size, na);
  for (Index s = 0; s < n; ++s) {
    for (Index m = 0; m < k; ++m) {
      const Index v = out.index(s, m);
      aug.state_names[v] = "(" + mdp.state_names[s] + "," + transducer.memory_names()[m] + ")";
      out.base_state[v] = s;
      out.memory[v] = m;
      aug.initial(v) = mdp.initial(s) * transducer.initial(s)(m);
      aug.reward.row(v) = mdp.reward.row(s);
    }
  }
  aug.transition.assign(na, Mat::Zero(size, size));
  for (Index a = 0; a < na; ++a) {
    Mat& p = aug.transition[a];
    for (Index s = 0; s < n; ++s) {
      for (Index m = 0; m < k; ++m) {
        const Index from = out.index(s, m);
        for (Index s2 = 0; s2 < n; ++s2) {
          const double ps = mdp.transition[a](s2, s);
          if (ps == 0.0) continue;
          const Vec& dm = transducer.update(m, s, a, s2);
          for (Index m2 = 0; m2 < k; ++m2) p(out.index(s2, m2), from) += ps * dm(m2);
        }
      }
    }
  }
  return out;
}

}  // namespace opaque

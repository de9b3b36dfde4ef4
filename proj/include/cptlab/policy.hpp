#pragma once

#include <variant>

#include "cptlab/policy_mlp.hpp"
#include "cptlab/policy_ops.hpp"
#include "cptlab/policy_tabular.hpp"

namespace cptlab {

/// Runtime-selected policy realization. Library operations are templates;
/// callers that read the realization from a config visit this once at the
/// boundary.
using AnyPolicy = std::variant<TabularPolicy, MlpPolicy>;

inline const Vocab& policy_vocab(const AnyPolicy& p) {
  return std::visit([](const auto& q) -> const Vocab& { return q.vocab(); },
                    p);
}

inline int policy_param_count(const AnyPolicy& p) {
  return std::visit([](const auto& q) { return q.param_count(); }, p);
}

inline int policy_max_len(const AnyPolicy& p) {
  return std::visit([](const auto& q) { return q.max_len(); }, p);
}

inline const char* policy_kind(const AnyPolicy& p) {
  return std::holds_alternative<TabularPolicy>(p) ? "tabular" : "mlp";
}

inline ParamVector policy_init_params(const AnyPolicy& p, Rng& rng) {
  return std::visit([&](const auto& q) { return q.init_params(rng); }, p);
}

}  // namespace cptlab

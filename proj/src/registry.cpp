#include <algorithm>

#include "fedsim/errors.hpp"
#include "fedsim/registry.hpp"
#include "strategies_internal.hpp"

namespace fedsim {

namespace {

std::vector<StrategyInfo> build_registry() {
  using namespace detail;
  const json null;
  std::vector<StrategyInfo> r = {
      {"afl", "fairness", "minimax weights over clients, projected ascent on the simplex",
       {{"eta_p", 0.1, "ascent step for the client weights"}}, make_afl},
      {"apfl", "personalized", "mixture of a personal and the global model",
       {{"zeta", 0.5, "personal mixing weight in [0,1]"}}, make_apfl},
      {"cfl", "clustering", "recursive bipartition by update cosine similarity",
       {{"eps1", 1e-3, "mean update norm below eps1*max(1,|w|) counts as stalled"},
        {"eps2", 0.0, "split only if the minimum cosine is below this"},
        {"eps_max", 1e-2, "split only if the largest update norm exceeds eps_max*max(1,|w|)"}},
       make_cfl},
      {"dane", "global", "local proximal subproblem with gradient correction",
       {{"mu", 0.1, "proximal weight"}}, make_dane},
      {"ditto", "personalized", "global FedAvg plus personal models pulled toward it",
       {{"mu", 1.0, "pull toward the global model"}}, make_ditto},
      {"fedac", "global", "accelerated local SGD with two sequences",
       {{"zeta1", 1.0, "coupling weight for the aggregate sequence"},
        {"zeta2", 1.0, "coupling weight for the main sequence"},
        {"eta1", 0.1, "main sequence step"},
        {"eta2", 0.1, "aggregate sequence step"}},
       make_fedac},
      {"fedadam", "global", "Adam server optimizer on the mean client delta",
       {{"zeta", 0.9, "first-moment decay"}, {"eps", 1e-3, "denominator offset"}, {"v0", 0.0, "initial second moment"}},
       make_fedadam},
      {"fedavg", "global", "federated averaging", {}, make_fedavg},
      {"fedavgm", "global", "server momentum on the mean client delta",
       {{"zeta", 0.9, "momentum"}}, make_fedavgm},
      {"feddyn", "global", "dynamic regularisation with per-client linear terms",
       {{"mu", 1.0, "regularisation weight"}}, make_feddyn},
      {"fedensemble", "global", "K models trained on a rotating client schedule",
       {{"models", 3, "ensemble size K"}, {"personal_gamma", 0.0, "softmax sharpness for per-client member weights"}},
       make_fedensemble},
      {"fedpd", "global", "primal-dual local updates with randomised syncing",
       {{"mu", 1.0, "penalty weight"}, {"p", 0.0, "probability of skipping a sync"}}, make_fedpd},
      {"fedper", "personalized", "shared base layers, personal head",
       {{"boundary", "layer0", "last shared layer; empty shares nothing"}}, make_fedper},
      {"fedprox", "global", "FedAvg with a proximal term", {{"mu", 0.01, "proximal weight"}}, make_fedprox},
      {"fedsgd", "global", "one full-batch gradient step per round", {}, make_fedsgd},
      {"fedsplit", "global", "Peaceman-Rachford splitting with inexact prox",
       {{"mu", 1.0, "prox weight"}}, make_fedsplit},
      {"fedsvrg", "global", "SCAFFOLD with a diagonal rescaling of the local correction",
       {{"control_variate", "gradient", "gradient|difference"}, {"rescale", 1.0, "scale on grad - c_i"}},
       make_fedsvrg},
      {"fedyogi", "global", "Yogi server optimizer on the mean client delta",
       {{"zeta", 0.9, "first-moment decay"}, {"eps", 1e-3, "denominator offset"}, {"v0", 0.0, "initial second moment"}},
       make_fedyogi},
      {"gifair", "fairness", "loss scaling by group rank to shrink the loss spread",
       {{"lambda", 0.1, "penalty strength"}, {"groups", "dataset", "dataset|individual"}}, make_gifair},
      {"hypcluster", "clustering", "clients pick the best of G cluster models",
       {{"clusters", 2, "cluster count G"}}, make_hypcluster},
      {"l2gd", "personalized", "loopless local gradient descent with random mixing",
       {{"p", 0.2, "mixing probability"}, {"alpha", 0.1, "mixing step"}, {"mu", 1.0, "pull toward the mean"}},
       make_l2gd},
      {"lgfedavg", "personalized", "personal base layers, shared head",
       {{"boundary", "layer0", "last personal layer"}}, make_lgfedavg},
      {"loadaboost", "global", "adaptive local epochs from the loss median",
       {}, make_loadaboost},
      {"local", "personalized", "local training only, no communication", {}, make_local},
      {"metasgd", "meta", "meta-learned initialisation and per-coordinate step sizes",
       {{"meta_lr", null, "outer step; null uses lr_local"},
        {"val_fraction", 0.5, "share of each client's data held for the meta loss"},
        {"freeze_eta", false, "keep step sizes fixed"},
        {"eta_init", null, "initial step size; null uses lr_local"}},
       make_metasgd},
      {"perfedavg", "meta", "MAML-style meta-loss on the clients",
       {{"alpha", 0.01, "inner adaptation step"},
        {"order", "second", "second|first"},
        {"inner_steps", 1, "inner adaptation steps"},
        {"schedule", "meta_only", "meta_only|fedavg_then_meta"},
        {"switch_fraction", 0.5, "share of rounds run as FedAvg under fedavg_then_meta"},
        {"adapt_steps", 1, "adaptation steps at evaluation"}},
       make_perfedavg},
      {"pfedme", "personalized", "Moreau-envelope personalization",
       {{"mu", 15.0, "envelope weight"},
        {"inner_lr", 0.05, "inner solver step"},
        {"tol", 1e-6, "inner solver gradient tolerance"},
        {"inner_max_steps", 2000, "inner solver step cap"}},
       make_pfedme},
      {"qffl", "fairness", "loss-powered reweighting of client updates",
       {{"q", 1.0, "fairness exponent"}}, make_qffl},
      {"scaffold", "global", "control variates against client drift",
       {{"control_variate", "gradient", "gradient|difference"}, {"rescale", 1.0, "scale on grad - c_i"}},
       make_scaffold},
      {"ttp", "personalized", "train globally, fine-tune locally at evaluation",
       {{"variant", "plain", "plain|prox|ewc"},
        {"steps", 5, "fine-tuning steps"},
        {"mu", 1.0, "regularisation weight for prox and ewc"},
        {"lr", null, "fine-tuning step; null uses lr_local"}},
       make_ttp},
  };
  std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return r;
}

}  // namespace

const std::vector<StrategyInfo>& strategy_registry() {
  static const std::vector<StrategyInfo> registry = build_registry();
  return registry;
}

std::vector<std::string> strategy_names() {
  std::vector<std::string> out;
  for (const auto& s : strategy_registry()) out.push_back(s.name);
  return out;
}

const StrategyInfo& strategy_info(const std::string& name) {
  for (const auto& s : strategy_registry()) {
    if (s.name == name) return s;
  }
  std::string known;
  for (const auto& n : strategy_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("strategy.name", "unknown strategy '" + name + "'; registered: " + known);
}

json resolve_params(const std::string& name, const json& params) {
  const StrategyInfo& info = strategy_info(name);
  if (!params.is_null() && !params.is_object()) throw ConfigError("strategy.params", "expected an object");
  json out = json::object();
  for (const auto& p : info.params) out[p.key] = p.default_value;
  if (params.is_object()) {
    for (const auto& [key, value] : params.items()) {
      if (!out.contains(key)) {
        std::string known;
        for (const auto& p : info.params) known += (known.empty() ? "" : ", ") + p.key;
        throw ConfigError("strategy.params." + key,
                          "unknown parameter for " + name + (known.empty() ? " (takes none)" : "; expected " + known));
      }
      out[key] = value;
    }
  }
  return out;
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params) {
  const StrategyInfo& info = strategy_info(name);
  return info.make(HyperParams(name, resolve_params(name, params)));
}

}  // namespace fedsim

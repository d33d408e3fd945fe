#include "cpl/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cpl/errors.hpp"
#include "cpl/rng.hpp"

namespace cpl {

CandidateSet::CandidateSet(std::vector<LabelId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool CandidateSet::contains(LabelId y) const {
  return std::binary_search(ids_.begin(), ids_.end(), y);
}

bool PartialDataset::precise() const {
  return std::all_of(candidates.begin(), candidates.end(),
                     [](const CandidateSet& s) { return s.size() == 1; });
}

double PartialDataset::mean_candidate_set_size() const {
  if (candidates.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& s : candidates) total += s.size();
  return static_cast<double>(total) / static_cast<double>(candidates.size());
}

bool is_probability_vector(const Eigen::VectorXd& probs, double tol) {
  if (probs.size() == 0) return false;
  if ((probs.array() < 0.0).any()) return false;
  return std::abs(probs.sum() - 1.0) <= tol;
}

std::string score_method_name(ScoreMethod m) {
  switch (m) {
    case ScoreMethod::Max: return "max";
    case ScoreMethod::All: return "all";
    case ScoreMethod::Mean: return "mean";
    case ScoreMethod::Min: return "min";
    case ScoreMethod::Mu: return "mu";
    case ScoreMethod::PreciseOracle: return "oracle";
  }
  return "?";
}

void SplitSpec::validate() const {
  if (train_fraction <= 0.0 || calib_fraction <= 0.0 || test_fraction <= 0.0) {
    throw ConfigError("split fractions must be positive");
  }
  double sum = train_fraction + calib_fraction + test_fraction;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

std::vector<std::string> validate_dataset(const PartialDataset& d) {
  std::vector<std::string> violations;
  auto add = [&violations](const std::string& msg) { violations.push_back(msg); };

  std::size_t n = d.candidates.size();
  if (static_cast<std::size_t>(d.features.rows()) != n) {
    add("feature rows (" + std::to_string(d.features.rows()) +
        ") do not match candidate count (" + std::to_string(n) + ")");
  }
  if (d.ids.size() != n) {
    add("id count does not match candidate count");
  }
  if (d.num_classes < 1) {
    add("num_classes must be >= 1");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = d.candidates[i];
    if (s.empty()) {
      add("empty candidate set @" + std::to_string(i));
      continue;
    }
    for (LabelId y : s.ids()) {
      if (y < 0 || y >= d.num_classes) {
        add("candidate label " + std::to_string(y) + " out of range @" +
            std::to_string(i));
      }
    }
  }
  if (d.hidden_truths) {
    if (d.hidden_truths->size() != n) {
      add("hidden truth count does not match candidate count");
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        LabelId y = (*d.hidden_truths)[i];
        if (y < 0 || y >= d.num_classes) {
          add("hidden truth " + std::to_string(y) + " out of range @" +
              std::to_string(i));
        } else if (!d.candidates[i].contains(y)) {
          add("hidden truth not in candidate set @" + std::to_string(i));
        }
      }
    }
  }
  return violations;
}

PartialDataset subset(const PartialDataset& d,
                      const std::vector<std::size_t>& indices) {
  PartialDataset out;
  out.num_classes = d.num_classes;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), d.features.cols());
  out.candidates.reserve(indices.size());
  out.ids.reserve(indices.size());
  if (d.hidden_truths) out.hidden_truths.emplace();
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::size_t i = indices[r];
    if (i >= d.size()) throw ConfigError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) =
        d.features.row(static_cast<Eigen::Index>(i));
    out.candidates.push_back(d.candidates[i]);
    out.ids.push_back(d.ids[i]);
    if (d.hidden_truths) out.hidden_truths->push_back((*d.hidden_truths)[i]);
  }
  return out;
}

SplitResult split(const PartialDataset& d, const SplitSpec& spec) {
  spec.validate();
  auto violations = validate_dataset(d);
  if (!violations.empty()) {
    throw ConfigError("invalid dataset: " + violations.front());
  }

  std::size_t n = d.size();
  auto n_train = static_cast<std::int64_t>(
      std::llround(spec.train_fraction * static_cast<double>(n)));
  auto n_calib = static_cast<std::int64_t>(
      std::llround(spec.calib_fraction * static_cast<double>(n)));
  std::int64_t n_test = static_cast<std::int64_t>(n) - n_train - n_calib;
  if (n_train < 1 || n_calib < 1 || n_test < 1) {
    throw ConfigError("empty split");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> calib_idx(order.begin() + n_train,
                                     order.begin() + n_train + n_calib);
  std::vector<std::size_t> test_idx(order.begin() + n_train + n_calib,
                                    order.end());

  return SplitResult{subset(d, train_idx), subset(d, calib_idx),
                     subset(d, test_idx)};
}

}  // namespace cpl

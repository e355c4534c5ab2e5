#include "ultrajump/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ultrajump/error.hpp"

namespace ultrajump {

// ---------------------------------------------------------------------------
// LambdaProfile

LambdaProfile::LambdaProfile(SpacePtr space, std::vector<std::vector<double>> values, std::string description)
    : space_(std::move(space)), values_(std::move(values)), description_(std::move(description)) {
  const auto& s = *space_;
  if (values_.size() != static_cast<std::size_t>(s.k_max() - s.k_min() + 1))
    throw Error(ErrorKind::LevelMismatch, "lambda profile needs one row per window level");
  for (int m = s.k_min(); m <= s.k_max(); ++m) {
    const auto& row = values_[static_cast<std::size_t>(m - s.k_min())];
    if (row.size() != s.size(m)) throw Error(ErrorKind::LevelMismatch, "lambda row size does not match level size");
    for (std::size_t b = 0; b < row.size(); ++b) {
      if (!(row[b] >= 0.0) || !std::isfinite(row[b]))
        throw Error(ErrorKind::NonMonotoneLambda, "lambda must be finite and non-negative");
      if (m > s.k_min() && row[b] < value(m - 1, s.parent(m, b)))
        throw Error(ErrorKind::NonMonotoneLambda, "lambda decreases from level " + std::to_string(m - 1) +
                                                      " to ball " + format_word(s.address(m, b).digits));
    }
  }
}

LambdaProfile LambdaProfile::geometric(SpacePtr space, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::NonMonotoneLambda, "geometric lambda needs alpha >= 0");
  std::vector<std::vector<double>> values;
  for (int m = space->k_min(); m <= space->k_max(); ++m)
    values.emplace_back(space->size(m), std::pow(space->q(), alpha * m));
  std::ostringstream out;
  out << "geometric(alpha=" << alpha << ")";
  return LambdaProfile(std::move(space), std::move(values), out.str());
}

LambdaProfile LambdaProfile::level_table(SpacePtr space, std::vector<double> per_level) {
  if (per_level.size() != static_cast<std::size_t>(space->k_max() - space->k_min() + 1))
    throw Error(ErrorKind::LevelMismatch, "lambda table needs one value per window level");
  std::vector<std::vector<double>> values;
  for (int m = space->k_min(); m <= space->k_max(); ++m)
    values.emplace_back(space->size(m), per_level[static_cast<std::size_t>(m - space->k_min())]);
  return LambdaProfile(std::move(space), std::move(values), "table(per level)");
}

LambdaProfile LambdaProfile::node_table(SpacePtr space, std::vector<std::vector<double>> per_node) {
  return LambdaProfile(std::move(space), std::move(per_node), "table(per node)");
}

double LambdaProfile::value(int level, std::size_t ball) const {
  return values_.at(static_cast<std::size_t>(level - space_->k_min())).at(ball);
}

// ---------------------------------------------------------------------------
// Kigami evaluation

namespace {

double kigami_increment(const LambdaProfile& profile, int m, std::size_t ball) {
  const auto& s = *profile.space();
  return (profile.value(m, ball) - profile.value(m - 1, s.parent(m, ball))) / s.mass(m, ball);
}

}  // namespace

double kigami_eval(const LambdaProfile& profile, std::size_t x, std::size_t y) {
  if (x == y) throw Error(ErrorKind::DiagonalQuery, "J(x, x) is not defined");
  const auto& s = *profile.space();
  const int r = s.separation_index(x, y);
  double sum = 0.0;
  for (int m = s.k_min() + 1; m < r; ++m) sum += kigami_increment(profile, m, s.leaf_ancestor(x, m));
  // At the separation level the two ancestors differ; the sibling check at
  // construction makes both increments agree, and averaging keeps the value
  // bitwise symmetric.
  const double tx = kigami_increment(profile, r, s.leaf_ancestor(x, r));
  const double ty = kigami_increment(profile, r, s.leaf_ancestor(y, r));
  return sum + 0.5 * (tx + ty);
}

namespace detail {

class KernelImpl {
 public:
  explicit KernelImpl(SpacePtr space) : space_(std::move(space)) {}
  virtual ~KernelImpl() = default;
  virtual double eval(std::size_t x, std::size_t y) const = 0;
  virtual JumpKernel::Variant variant() const = 0;
  virtual std::string describe() const = 0;
  virtual double bc_tolerance() const { return 0.0; }

  const SpacePtr space_;
};

namespace {

class KigamiImpl final : public KernelImpl {
 public:
  explicit KigamiImpl(const LambdaProfile& profile) : KernelImpl(profile.space()), profile_(profile) {
    const auto& s = *space_;
    const int depth = s.k_max() - s.k_min();
    increment_.resize(static_cast<std::size_t>(depth) + 1);
    prefix_.resize(static_cast<std::size_t>(depth) + 1);
    prefix_[0].assign(1, 0.0);
    increment_[0].assign(1, 0.0);
    for (int m = s.k_min() + 1; m <= s.k_max(); ++m) {
      const auto l = static_cast<std::size_t>(m - s.k_min());
      increment_[l].resize(s.size(m));
      prefix_[l].resize(s.size(m));
      for (std::size_t b = 0; b < s.size(m); ++b) {
        increment_[l][b] = kigami_increment(profile, m, b);
        prefix_[l][b] = prefix_[l - 1][s.parent(m, b)] + increment_[l][b];
      }
    }
    // Symmetry of the telescoping sum needs equal increments among siblings.
    for (int m = s.k_min(); m < s.k_max(); ++m) {
      for (std::size_t b = 0; b < s.size(m); ++b) {
        const auto kids = s.children(m, b);
        const auto& inc = increment_[static_cast<std::size_t>(m + 1 - s.k_min())];
        for (auto c = kids.begin + 1; c < kids.end; ++c) {
          const double a = inc[kids.begin];
          const double d = inc[c];
          if (std::abs(a - d) > 1e-12 * std::max(std::abs(a), std::abs(d)))
            throw Error(ErrorKind::AsymmetricKernel,
                        "children of ball '" + format_word(s.address(m, b).digits) +
                            "' have different lambda increments per unit mass; J would not be symmetric");
        }
      }
    }
  }

  double eval(std::size_t x, std::size_t y) const override {
    const auto& s = *space_;
    const int r = s.separation_index(x, y);
    const auto l = static_cast<std::size_t>(r - s.k_min());
    const double shared = prefix_[l - 1][s.leaf_ancestor(x, r - 1)];
    const auto& inc = increment_[l];
    return shared + 0.5 * (inc[s.leaf_ancestor(x, r)] + inc[s.leaf_ancestor(y, r)]);
  }

  JumpKernel::Variant variant() const override { return JumpKernel::Variant::Kigami; }
  std::string describe() const override { return "kigami " + profile_.describe(); }

  const LambdaProfile& profile() const { return profile_; }

 private:
  LambdaProfile profile_;
  std::vector<std::vector<double>> increment_;
  std::vector<std::vector<double>> prefix_;
};

class TableImpl final : public KernelImpl {
 public:
  TableImpl(SpacePtr space, const Eigen::MatrixXd& matrix) : KernelImpl(std::move(space)), matrix_(matrix) {
    const auto n = static_cast<Eigen::Index>(space_->leaf_count());
    if (matrix_.rows() != n || matrix_.cols() != n)
      throw Error(ErrorKind::LevelMismatch, "kernel table must be " + std::to_string(n) + "x" + std::to_string(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      matrix_(i, i) = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(matrix_(i, j) >= 0.0) || !std::isfinite(matrix_(i, j)))
          throw Error(ErrorKind::NegativeRate, "kernel table entries must be finite and non-negative");
        if (matrix_(i, j) != matrix_(j, i))
          throw Error(ErrorKind::AsymmetricKernel, "kernel table is not symmetric at (" + std::to_string(i) + ", " +
                                                       std::to_string(j) + ")");
      }
    }
  }

  double eval(std::size_t x, std::size_t y) const override {
    return matrix_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
  JumpKernel::Variant variant() const override { return JumpKernel::Variant::Table; }
  std::string describe() const override { return "table " + std::to_string(matrix_.rows()) + "x" +
                                                  std::to_string(matrix_.cols()); }

 private:
  Eigen::MatrixXd matrix_;
};

class MixedImpl final : public KernelImpl {
 public:
  MixedImpl(const std::vector<LambdaProfile>& components, const GammaSpec& gamma)
      : KernelImpl(components.empty() ? nullptr : components.front().space()) {
    if (components.empty()) throw Error(ErrorKind::ComponentCountMismatch, "mixed kernel needs a component");
    for (const auto& c : components) {
      if (c.space()->id() != space_->id())
        throw Error(ErrorKind::MixedSpaces, "mixed components live on different spaces");
      components_.push_back(std::make_shared<KigamiImpl>(c));
    }
    const auto check = [&](std::size_t component) {
      if (component < 1 || component > components_.size())
        throw Error(ErrorKind::ComponentCountMismatch,
                    "gamma refers to component " + std::to_string(component) + " of " +
                        std::to_string(components_.size()));
      return component;
    };
    default_ = check(gamma.default_component);
    for (const auto& [level, component] : gamma.by_level) {
      if (!space_->in_window(level)) throw Error(ErrorKind::LevelOutOfWindow, "gamma level outside window");
      by_level_[level] = check(component);
    }

    const auto& s = *space_;
    if (gamma.leaf_matrix) {
      const auto& m = *gamma.leaf_matrix;
      const auto n = s.leaf_count();
      if (m.size() != n) throw Error(ErrorKind::LevelMismatch, "gamma leaf matrix has wrong size");
      for (std::size_t x = 0; x < n; ++x) {
        if (m[x].size() != n) throw Error(ErrorKind::LevelMismatch, "gamma leaf matrix has wrong size");
        for (std::size_t y = 0; y < n; ++y) {
          if (x == y) continue;
          if (m[x][y] != m[y][x]) throw Error(ErrorKind::InconsistentGamma, "gamma leaf matrix is not symmetric");
          assign(key(x, y), check(m[x][y]));
        }
      }
    }
    for (const auto& entry : gamma.pairs) {
      if (!s.in_window(entry.level)) throw Error(ErrorKind::LevelOutOfWindow, "gamma pair level outside window");
      if (entry.i == entry.j || entry.i >= s.size(entry.level) || entry.j >= s.size(entry.level))
        throw Error(ErrorKind::InconsistentGamma, "gamma pair must name two distinct balls of its level");
      const auto k = key(s.leaves(entry.level, entry.i).begin, s.leaves(entry.level, entry.j).begin);
      if (gamma.leaf_matrix) {
        if (table_.at(k) != check(entry.component))
          throw Error(ErrorKind::InconsistentGamma, "gamma pair entry contradicts the leaf matrix");
        continue;
      }
      assign(k, check(entry.component));
    }
  }

  double eval(std::size_t x, std::size_t y) const override { return components_[component(x, y) - 1]->eval(x, y); }

  std::size_t component(std::size_t x, std::size_t y) const {
    const auto k = key(x, y);
    if (auto it = table_.find(k); it != table_.end()) return it->second;
    if (auto it = by_level_.find(std::get<0>(k)); it != by_level_.end()) return it->second;
    return default_;
  }

  JumpKernel::Variant variant() const override { return JumpKernel::Variant::Mixed; }
  std::string describe() const override {
    std::ostringstream out;
    out << "mixed l=" << components_.size() << " [";
    for (std::size_t i = 0; i < components_.size(); ++i) out << (i ? ", " : "") << components_[i]->describe();
    out << "], gamma: " << table_.size() << " pair entries, " << by_level_.size() << " level entries, default "
        << default_;
    return out.str();
  }

  const std::vector<std::shared_ptr<const KigamiImpl>>& components() const { return components_; }

 private:
  using Key = std::tuple<int, std::size_t, std::size_t>;

  // Sibling pair at the separation level of two leaves.
  Key key(std::size_t x, std::size_t y) const {
    const auto& s = *space_;
    const int r = s.separation_index(x, y);
    auto a = s.leaf_ancestor(x, r);
    auto b = s.leaf_ancestor(y, r);
    if (a > b) std::swap(a, b);
    return {r, a, b};
  }

  void assign(const Key& k, std::size_t component) {
    auto [it, inserted] = table_.emplace(k, component);
    if (!inserted && it->second != component)
      throw Error(ErrorKind::InconsistentGamma,
                  "gamma is not constant on the ball pair separated at level " + std::to_string(std::get<0>(k)));
  }

  std::vector<std::shared_ptr<const KigamiImpl>> components_;
  std::map<Key, std::size_t> table_;
  std::map<int, std::size_t> by_level_;
  std::size_t default_ = 1;
};

class PerturbedImpl final : public KernelImpl {
 public:
  PerturbedImpl(JumpKernel base, double epsilon, std::vector<int> signs)
      : KernelImpl(base.space_ptr()), base_(std::move(base)), epsilon_(epsilon), signs_(std::move(signs)) {
    if (!(std::abs(epsilon_) < 1.0)) throw Error(ErrorKind::NegativeRate, "perturbation needs |epsilon| < 1");
    if (signs_.size() != space_->leaf_count())
      throw Error(ErrorKind::LevelMismatch, "sign function needs one entry per leaf");
    for (int s : signs_)
      if (s != 1 && s != -1) throw Error(ErrorKind::ConfigParseError, "signs must be +1 or -1");
  }

  double eval(std::size_t x, std::size_t y) const override {
    return base_(x, y) * (1.0 + epsilon_ * static_cast<double>(signs_[x] * signs_[y]));
  }
  JumpKernel::Variant variant() const override { return JumpKernel::Variant::Perturbed; }
  std::string describe() const override {
    std::ostringstream out;
    out << "perturbed(epsilon=" << epsilon_ << ", signs=";
    for (int s : signs_) out << (s > 0 ? '+' : '-');
    out << ") of " << base_.describe();
    return out.str();
  }
  double bc_tolerance() const override { return 1e-12; }

  const JumpKernel& base() const { return base_; }

 private:
  JumpKernel base_;
  double epsilon_;
  std::vector<int> signs_;
};

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------
// JumpKernel

JumpKernel JumpKernel::kigami(const LambdaProfile& profile) {
  return JumpKernel(std::make_shared<detail::KigamiImpl>(profile));
}

JumpKernel JumpKernel::table(SpacePtr space, const Eigen::MatrixXd& matrix) {
  return JumpKernel(std::make_shared<detail::TableImpl>(std::move(space), matrix));
}

JumpKernel JumpKernel::mixed(const std::vector<LambdaProfile>& components, const GammaSpec& gamma) {
  return JumpKernel(std::make_shared<detail::MixedImpl>(components, gamma));
}

JumpKernel JumpKernel::perturbed(const JumpKernel& base, double epsilon, std::vector<int> signs) {
  return JumpKernel(std::make_shared<detail::PerturbedImpl>(base, epsilon, std::move(signs)));
}

double JumpKernel::operator()(std::size_t x, std::size_t y) const {
  if (x == y) throw Error(ErrorKind::DiagonalQuery, "J(x, x) is not defined");
  return impl_->eval(x, y);
}

JumpKernel::Variant JumpKernel::variant() const { return impl_->variant(); }
const TreeSpace& JumpKernel::space() const { return *impl_->space_; }
const SpacePtr& JumpKernel::space_ptr() const { return impl_->space_; }
std::string JumpKernel::describe() const { return impl_->describe(); }
double JumpKernel::bc_tolerance() const { return impl_->bc_tolerance(); }

std::size_t JumpKernel::component_of(std::size_t x, std::size_t y) const {
  const auto* mixed = dynamic_cast<const detail::MixedImpl*>(impl_.get());
  if (!mixed) throw Error(ErrorKind::ComponentCountMismatch, "not a mixed kernel");
  if (x == y) throw Error(ErrorKind::DiagonalQuery, "gamma is not defined on the diagonal");
  return mixed->component(x, y);
}

std::size_t JumpKernel::component_count() const {
  const auto* mixed = dynamic_cast<const detail::MixedImpl*>(impl_.get());
  return mixed ? mixed->components().size() : 1;
}

std::vector<JumpKernel> JumpKernel::parts() const {
  std::vector<JumpKernel> out;
  if (const auto* mixed = dynamic_cast<const detail::MixedImpl*>(impl_.get())) {
    for (const auto& c : mixed->components()) out.push_back(JumpKernel(c));
  } else if (const auto* p = dynamic_cast<const detail::PerturbedImpl*>(impl_.get())) {
    out.push_back(p->base());
  }
  return out;
}

Eigen::MatrixXd JumpKernel::leaf_matrix() const {
  const auto n = space().leaf_count();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (x != y) out(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = impl_->eval(x, y);
  return out;
}

// ---------------------------------------------------------------------------
// Averaging and conditions

namespace {

bool same_value(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

AveragedKernel average(const JumpKernel& kernel, int k) {
  const auto& s = kernel.space();
  if (!s.in_window(k)) throw Error(ErrorKind::LevelOutOfWindow, "average: level " + std::to_string(k));
  const auto n = s.size(k);
  const auto leaf_mu = s.masses(s.k_max());
  AveragedKernel out;
  out.level = k;
  out.rates = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto bi = s.leaves(k, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto bj = s.leaves(k, j);
      const double first = kernel(bi.begin, bj.begin);
      bool constant = true;
      double sum = 0.0;
      for (auto x = bi.begin; x < bi.end; ++x) {
        double row = 0.0;
        for (auto y = bj.begin; y < bj.end; ++y) {
          const double v = kernel(x, y);
          constant = constant && v == first;
          row += v * leaf_mu[y];
        }
        sum += row * leaf_mu[x];
      }
      // The mean of a constant is the constant; skip the rounding of the
      // weighted sum in that case.
      const double rate = constant ? first : sum / (s.mass(k, i) * s.mass(k, j));
      out.rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rate;
      out.rates(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = rate;
    }
  }
  return out;
}

BcResult detect_bc(const JumpKernel& kernel, int k) {
  const auto& s = kernel.space();
  if (!s.in_window(k)) throw Error(ErrorKind::LevelOutOfWindow, "detect_bc: level " + std::to_string(k));
  const double tol = kernel.bc_tolerance();
  const auto n = s.size(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bi = s.leaves(k, i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto bj = s.leaves(k, j);
      // Columns constant in x ...
      for (auto y = bj.begin; y < bj.end; ++y) {
        const double ref = kernel(bi.begin, y);
        for (auto x = bi.begin + 1; x < bi.end; ++x)
          if (!same_value(kernel(x, y), ref, tol)) return {false, BcWitness{i, j, bi.begin, x, y}};
      }
      // ... and the first row constant in y. Witness is stated with the roles
      // of the balls swapped so that it still varies the first argument.
      const double ref = kernel(bi.begin, bj.begin);
      for (auto y = bj.begin + 1; y < bj.end; ++y)
        if (!same_value(kernel(bi.begin, y), ref, tol)) return {false, BcWitness{j, i, bj.begin, y, bi.begin}};
    }
  }
  return {true, std::nullopt};
}

ConditionReport validate_conditions(const JumpKernel& kernel, int k1) {
  const auto& s = kernel.space();
  if (!s.in_window(k1)) throw Error(ErrorKind::LevelOutOfWindow, "validate_conditions: k1 = " + std::to_string(k1));
  const int K = s.k_max();
  const auto n = s.leaf_count();
  const auto mu = s.masses(K);

  // Jump intensity from leaf x into leaf y.
  Eigen::MatrixXd w = kernel.leaf_matrix();
  for (Eigen::Index y = 0; y < w.cols(); ++y) w.col(y) *= mu[static_cast<std::size_t>(y)];

  ConditionReport report;
  report.k1 = k1;
  report.resolution = K;
  report.note = "certificate at resolution K=" + std::to_string(K) + "; finite truncation maxima, not a proof";

  // exit(x, k) = sum_{y outside the level-k ball of x} w(x, y)
  auto exit_rate = [&](std::size_t x, int k) {
    const auto ball = s.leaves(k, s.leaf_ancestor(x, k));
    double total = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      if (y < ball.begin || y >= ball.end) total += w(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    return total;
  };

  for (int k = s.k_min(); k <= K; ++k) {
    std::vector<double> exit_k(n), exit_k1(n);
    for (std::size_t x = 0; x < n; ++x) {
      exit_k[x] = exit_rate(x, k);
      exit_k1[x] = exit_rate(x, k1);
    }
    for (std::size_t b = 0; b < s.size(k); ++b) {
      const auto ball = s.leaves(k, b);
      double a1 = 0.0;
      double a3 = 0.0;
      for (auto x = ball.begin; x < ball.end; ++x) {
        a1 += exit_k[x] * mu[x];
        a3 += exit_k1[x] * mu[x];
      }
      report.a1 = std::max(report.a1, a1);
      if (k >= k1) report.a3 = std::max(report.a3, a3 / s.mass(k, b));
    }
  }

  for (std::size_t x = 0; x < n; ++x) {
    double far = 0.0;
    for (std::size_t y = 0; y < n; ++y)
      if (y != x && s.separation_index(x, y) <= 0) far += w(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
    report.a4 = std::max(report.a4, far);
  }
  return report;
}

}  // namespace ultrajump

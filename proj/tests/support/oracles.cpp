#include "oracles.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace oracle {

Grid naive_matmul(const Grid& a, const Grid& b) {
  const std::size_t n = a.size(), m = b.size(), p = b.empty() ? 0 : b[0].size();
  Grid c(n, std::vector<double>(p, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t k = 0; k < m; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

BfsPlanner::BfsPlanner(const realism::KnowledgeGraph& graph) {
  for (const auto& t : graph.traits()) ids_.push_back(t.id);
  blockers_.assign(ids_.size(), 0);
  prerequisites_.assign(ids_.size(), 0);
  std::unordered_map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < ids_.size(); ++i) at[ids_[i]] = i;
  for (const auto& r : graph.relations()) {
    const std::size_t s = at.at(r.src), d = at.at(r.dst);
    if (r.kind == realism::RelationKind::opposes) {
      blockers_[s] |= 1u << d;
      blockers_[d] |= 1u << s;
    } else if (r.prerequisite) {
      prerequisites_[d] |= 1u << s;
    }
  }
}

bool BfsPlanner::can_enable(std::uint32_t state, std::size_t t) const {
  return !(state >> t & 1u) && (state & blockers_[t]) == 0 && (state & prerequisites_[t]) == prerequisites_[t];
}

std::optional<std::size_t> BfsPlanner::cost(std::uint32_t initial, std::uint32_t goal_mask,
                                            std::uint32_t goal_value) const {
  const std::size_t n = ids_.size();
  std::vector<int> dist(std::size_t{1} << n, -1);
  std::deque<std::uint32_t> queue{initial};
  dist[initial] = 0;
  while (!queue.empty()) {
    const std::uint32_t s = queue.front();
    queue.pop_front();
    if ((s & goal_mask) == (goal_value & goal_mask)) return static_cast<std::size_t>(dist[s]);
    for (std::size_t t = 0; t < n; ++t) {
      std::uint32_t next;
      if (s >> t & 1u) {
        next = s & ~(1u << t);
      } else if (can_enable(s, t)) {
        next = s | (1u << t);
      } else {
        continue;
      }
      if (dist[next] < 0) {
        dist[next] = dist[s] + 1;
        queue.push_back(next);
      }
    }
  }
  return std::nullopt;
}

std::optional<std::uint32_t> BfsPlanner::simulate(std::uint32_t state, const std::vector<std::string>& actions) const {
  for (const auto& a : actions) {
    const bool enable = a.rfind("enable-", 0) == 0;
    const bool disable = a.rfind("disable-", 0) == 0;
    if (!enable && !disable) return std::nullopt;
    const std::string id = a.substr(enable ? 7 : 8);
    std::size_t t = ids_.size();
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (ids_[i] == id) t = i;
    if (t == ids_.size()) return std::nullopt;
    if (enable) {
      if (!can_enable(state, t)) return std::nullopt;
      state |= 1u << t;
    } else {
      if (!(state >> t & 1u)) return std::nullopt;
      state &= ~(1u << t);
    }
  }
  return state;
}

bool BfsPlanner::violates_opposition(std::uint32_t state) const {
  for (std::size_t t = 0; t < ids_.size(); ++t)
    if ((state >> t & 1u) && (state & blockers_[t])) return true;
  return false;
}

double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0) throw std::runtime_error("pairwise_auc needs both classes");
  return wins / static_cast<double>(pairs);
}

double scalar_trait_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double per_window_ssim(const std::vector<double>& x, const std::vector<double>& y, std::size_t w, std::size_t h,
                       std::size_t win, double sigma, double c1, double c2) {
  std::vector<double> kernel(win * win);
  const double c = (static_cast<double>(win) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < win; ++i)
    for (std::size_t j = 0; j < win; ++j) {
      const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
      kernel[i * win + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += kernel[i * win + j];
    }
  for (double& k : kernel) k /= total;

  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t oy = 0; oy + win <= h; ++oy)
    for (std::size_t ox = 0; ox + win <= w; ++ox) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double k = kernel[i * win + j];
          mx += k * x[(oy + i) * w + ox + j];
          my += k * y[(oy + i) * w + ox + j];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double k = kernel[i * win + j];
          const double dx = x[(oy + i) * w + ox + j] - mx, dy = y[(oy + i) * w + ox + j] - my;
          vx += k * dx * dx;
          vy += k * dy * dy;
          cxy += k * dx * dy;
        }
      sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return sum / static_cast<double>(windows);
}

std::string random_ontology_json(realism::Rng& rng, std::size_t n, std::size_t relations) {
  static const char* categories[] = {"lighting", "shadows", "material", "edge_geometry",
                                     "optical_sensor", "color_reflectivity", "scene_consistency"};
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789_.";
  std::vector<std::string> ids;
  std::set<std::string> seen;
  while (ids.size() < n) {
    std::string id(1, static_cast<char>('a' + rng.index(26)));
    const std::size_t len = 1 + rng.index(10);
    for (std::size_t k = 0; k < len; ++k) id += alphabet[rng.index(sizeof alphabet - 1)];
    if (seen.insert(id).second) ids.push_back(id);
  }
  std::ostringstream out;
  out.precision(17);
  out << "{\"traits\": [";
  for (std::size_t i = 0; i < n; ++i) {
    out << (i ? "," : "") << "{\"id\": \"" << ids[i] << "\", \"display_name\": \"Trait " << i
        << "\", \"category\": \"" << categories[rng.index(7)] << "\", \"enable_instruction\": \"add " << ids[i]
        << "\", \"disable_instruction\": \"remove " << ids[i] << "\"}";
  }
  out << "], \"relations\": [";
  std::set<std::pair<std::size_t, std::size_t>> used;
  bool first = true;
  for (std::size_t attempt = 0; attempt < relations * 4 && used.size() < relations && n > 1; ++attempt) {
    const std::size_t a = rng.index(n), b = rng.index(n);
    if (a == b || used.count({std::min(a, b), std::max(a, b)})) continue;
    used.insert({std::min(a, b), std::max(a, b)});
    const bool supports = rng.uniform() < 0.6;
    const double magnitude = 0.1 + 2.0 * rng.uniform();
    out << (first ? "" : ",") << "{\"src\": \"" << ids[a] << "\", \"dst\": \"" << ids[b] << "\", \"kind\": \""
        << (supports ? "supports" : "opposes") << "\", \"weight\": " << (supports ? magnitude : -magnitude)
        << ", \"prerequisite\": " << (supports && rng.uniform() < 0.7 ? "true" : "false") << "}";
    first = false;
  }
  out << "]}";
  return out.str();
}

}  // namespace oracle

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace survim {

/// One column of a feature expansion: a main term (b < 0) or a product x_a * x_b.
struct BasisTerm {
  int a = 0;
  int b = -1;
  bool operator==(const BasisTerm&) const = default;
};

/// Feature expansion built from a descriptor string. Components are joined with '+':
///   main                every feature
///   pairs               all pairwise products
///   pairs(1:2,3:4)      listed products (1-based indices)
///   squares[(1,2,...)]  squares of all or listed features
///   quadratic[(...)]    main + squares + pairs, with squares/pairs over listed features
/// Terms touching an excluded feature are dropped.
class Basis {
 public:
  Basis() = default;

  static Basis parse(const std::string& descriptor, std::size_t p, const std::vector<std::size_t>& excluded = {}) {
    Basis bs;
    bs.descriptor_ = descriptor;
    bs.p_ = p;
    std::vector<BasisTerm> terms;
    std::vector<std::string> parts;
    {
      // split on '+' outside parentheses
      std::string cur;
      int depth = 0;
      for (char c : descriptor) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == '+' && depth == 0) {
          parts.push_back(cur);
          cur.clear();
        } else if (c != ' ') {
          cur.push_back(c);
        }
      }
      parts.push_back(cur);
    }
    auto all = [&] {
      std::vector<int> v;
      for (std::size_t j = 0; j < p; ++j) v.push_back(static_cast<int>(j));
      return v;
    };
    for (const auto& part : parts) {
      if (part.empty()) throw ConfigurationError("empty basis component in '" + descriptor + "'");
      const auto lp = part.find('(');
      const std::string head = part.substr(0, lp);
      std::string args;
      if (lp != std::string::npos) {
        if (part.back() != ')') throw ConfigurationError("unbalanced parentheses in basis '" + descriptor + "'");
        args = part.substr(lp + 1, part.size() - lp - 2);
      }
      if (head == "main") {
        for (int j : all()) terms.push_back({j, -1});
      } else if (head == "none") {
      } else if (head == "pairs") {
        if (args.empty()) {
          for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a + 1; b < p; ++b) terms.push_back({static_cast<int>(a), static_cast<int>(b)});
        } else {
          for (const auto& pr : split(args, ',')) {
            const auto c = pr.find(':');
            if (c == std::string::npos) throw ConfigurationError("pair '" + pr + "' must look like a:b");
            const int a = index(pr.substr(0, c), p), b = index(pr.substr(c + 1), p);
            if (a == b) throw ConfigurationError("pair '" + pr + "' repeats a feature; use squares");
            terms.push_back({std::min(a, b), std::max(a, b)});
          }
        }
      } else if (head == "squares" || head == "quadratic") {
        std::vector<int> feats;
        if (args.empty()) feats = all();
        else
          for (const auto& t : split(args, ',')) feats.push_back(index(t, p));
        if (head == "quadratic")
          for (int j : all()) terms.push_back({j, -1});
        for (int j : feats) terms.push_back({j, j});
        if (head == "quadratic")
          for (std::size_t u = 0; u < feats.size(); ++u)
            for (std::size_t v = u + 1; v < feats.size(); ++v)
              terms.push_back({std::min(feats[u], feats[v]), std::max(feats[u], feats[v])});
      } else {
        throw ConfigurationError("unknown basis component '" + head + "'");
      }
    }
    std::set<std::size_t> ex(excluded.begin(), excluded.end());
    for (const auto& t : terms) {
      if (ex.count(static_cast<std::size_t>(t.a)) || (t.b >= 0 && ex.count(static_cast<std::size_t>(t.b)))) continue;
      if (std::find(bs.terms_.begin(), bs.terms_.end(), t) == bs.terms_.end()) bs.terms_.push_back(t);
    }
    return bs;
  }

  const std::vector<BasisTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  const std::string& descriptor() const { return descriptor_; }

  std::string term_name(std::size_t k, const std::vector<std::string>& names = {}) const {
    auto nm = [&](int j) {
      return static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : "x" + std::to_string(j + 1);
    };
    const auto& t = terms_[k];
    if (t.b < 0) return nm(t.a);
    if (t.a == t.b) return nm(t.a) + "^2";
    return nm(t.a) + "*" + nm(t.b);
  }

  /// Design matrix without intercept.
  Eigen::MatrixXd expand(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != p_)
      throw ContractError("basis built for p = " + std::to_string(p_) + " applied to " + std::to_string(x.cols()) +
                          " columns");
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(terms_.size()));
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      const auto& t = terms_[k];
      if (t.b < 0) out.col(static_cast<Eigen::Index>(k)) = x.col(t.a);
      else out.col(static_cast<Eigen::Index>(k)) = x.col(t.a).cwiseProduct(x.col(t.b));
    }
    return out;
  }

  /// Design matrix with a leading column of ones.
  Eigen::MatrixXd design(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(terms_.size()) + 1);
    out.col(0).setOnes();
    out.rightCols(static_cast<Eigen::Index>(terms_.size())) = expand(x);
    return out;
  }

 private:
  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep))
      if (!cur.empty()) out.push_back(cur);
    return out;
  }
  static int index(const std::string& s, std::size_t p) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || v < 1 || static_cast<std::size_t>(v) > p)
      throw ConfigurationError("basis references feature '" + s + "' outside 1.." + std::to_string(p));
    return static_cast<int>(v - 1);
  }

  std::string descriptor_;
  std::size_t p_ = 0;
  std::vector<BasisTerm> terms_;
};

}  // namespace survim

#pragma once

#include <numeric>
#include <utility>
#include <vector>

namespace nodal {

/// Disjoint sets with path halving and union by size.
class UnionFind {
  public:
    explicit UnionFind(int n = 0) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

    int add() {
        parent_.push_back(static_cast<int>(parent_.size()));
        size_.push_back(1);
        return parent_.back();
    }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size_[a] < size_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        return true;
    }

    int size() const { return static_cast<int>(parent_.size()); }

    /// Dense component ids 0..k-1 in order of first appearance; returns k.
    int labels(std::vector<int>& out) {
        std::vector<int> map(parent_.size(), -1);
        out.assign(parent_.size(), -1);
        int k = 0;
        for (int i = 0; i < size(); ++i) {
            const int r = find(i);
            if (map[r] < 0) map[r] = k++;
            out[i] = map[r];
        }
        return k;
    }

  private:
    std::vector<int> parent_, size_;
};

}  // namespace nodal

#pragma once

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dpm/photon.hpp"

namespace dpm {

struct NeighborRef {
    std::uint32_t index;  // index into the dump's photon array
    double distance;
};

/// Result of a k-nearest-neighbor query: ascending by (distance, index), the
/// bandwidth r equals the distance of the last (K-th) photon. When the map
/// holds fewer than K photons, all of them are returned and r is the largest
/// distance found.
struct Neighborhood {
    std::vector<NeighborRef> photons;
    double r = 0.0;
    size_t k() const { return photons.size(); }
};

/// Immutable median-split kd-tree over photon positions. Exact queries,
/// deterministic tie-breaking by ascending photon index. Safe for concurrent
/// reads after construction.
class PhotonMap {
public:
    explicit PhotonMap(std::shared_ptr<const PhotonDump> dump) : dump_(std::move(dump)) {
        if (!dump_ || dump_->photons.empty())
            throw std::invalid_argument("PhotonMap: empty photon dump");
        size_t n = dump_->photons.size();
        order_.resize(n);
        for (size_t i = 0; i < n; ++i) order_[i] = static_cast<std::uint32_t>(i);
        nodes_.resize(n);
        build(0, n);
    }

    /// Non-owning view; the dump must outlive the map.
    explicit PhotonMap(const PhotonDump& dump)
        : PhotonMap(std::shared_ptr<const PhotonDump>(&dump, [](const PhotonDump*) {})) {}

    const PhotonDump& dump() const { return *dump_; }
    std::uint64_t n_paths() const { return dump_->n_paths; }
    size_t size() const { return nodes_.size(); }
    const Photon& photon(std::uint32_t index) const { return dump_->photons[index]; }

    Neighborhood knn(const Vec3& query, size_t K) const {
        return knn_if(query, K, [](std::uint32_t) { return true; });
    }

    /// Exact K nearest among the photons accepted by `keep`. Skipping photons
    /// only widens the search bound, so the result stays exact for any
    /// predicate; used to query path-thinned subsets without rebuilding.
    template <typename Keep>
    Neighborhood knn_if(const Vec3& query, size_t K, Keep&& keep) const {
        if (K < 1) throw std::invalid_argument("knn: K must be >= 1");
        KnnHeap heap(K);
        knn_walk(0, nodes_.size(), query, heap, keep);
        Neighborhood nb;
        nb.photons.resize(heap.entries.size());
        std::sort(heap.entries.begin(), heap.entries.end(), EntryLess{});
        for (size_t i = 0; i < heap.entries.size(); ++i)
            nb.photons[i] = NeighborRef{heap.entries[i].index, std::sqrt(heap.entries[i].d2)};
        nb.r = nb.photons.empty() ? 0.0 : nb.photons.back().distance;
        return nb;
    }

    /// All photons within the closed ball of the given radius, unsorted.
    void gather(const Vec3& query, double radius, std::vector<std::uint32_t>& out) const {
        out.clear();
        gather_walk(0, nodes_.size(), query, radius * radius, out);
    }

private:
    struct Node {
        std::uint32_t photon;  // median element owned by this node
        std::uint8_t axis;
    };

    struct Entry {
        double d2;
        std::uint32_t index;
    };

    // lexicographic (distance^2, index): the ordering that defines "nearest"
    struct EntryLess {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
        }
    };

    struct KnnHeap {
        explicit KnnHeap(size_t cap) : capacity(cap) { entries.reserve(cap); }

        bool full() const { return entries.size() == capacity; }
        double worst_d2() const { return entries.front().d2; }

        void offer(const Entry& e) {
            if (!full()) {
                entries.push_back(e);
                std::push_heap(entries.begin(), entries.end(), EntryLess{});
            } else if (EntryLess{}(e, entries.front())) {
                std::pop_heap(entries.begin(), entries.end(), EntryLess{});
                entries.back() = e;
                std::push_heap(entries.begin(), entries.end(), EntryLess{});
            }
        }

        size_t capacity;
        std::vector<Entry> entries;  // max-heap by (d2, index)
    };

    void build(size_t lo, size_t hi) {
        if (lo >= hi) return;
        Aabb3 bounds;
        for (size_t i = lo; i < hi; ++i) bounds.grow(dump_->photons[order_[i]].position);
        int axis = bounds.widest_axis();
        size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             double ca = dump_->photons[a].position[axis];
                             double cb = dump_->photons[b].position[axis];
                             return ca < cb || (ca == cb && a < b);
                         });
        nodes_[mid] = Node{order_[mid], static_cast<std::uint8_t>(axis)};
        build(lo, mid);
        build(mid + 1, hi);
    }

    template <typename Keep>
    void knn_walk(size_t lo, size_t hi, const Vec3& query, KnnHeap& heap, Keep&& keep) const {
        if (lo >= hi) return;
        size_t mid = (lo + hi) / 2;
        const Node& node = nodes_[mid];
        const Vec3& p = dump_->photons[node.photon].position;
        if (keep(node.photon)) heap.offer(Entry{(p - query).length_squared(), node.photon});

        double delta = query[node.axis] - p[node.axis];
        size_t near_lo = delta <= 0.0 ? lo : mid + 1;
        size_t near_hi = delta <= 0.0 ? mid : hi;
        size_t far_lo = delta <= 0.0 ? mid + 1 : lo;
        size_t far_hi = delta <= 0.0 ? hi : mid;

        knn_walk(near_lo, near_hi, query, heap, keep);
        // the far side may still hold closer photons (or equal-distance ones
        // with smaller indices), so prune only on a strictly larger gap
        if (!heap.full() || delta * delta <= heap.worst_d2())
            knn_walk(far_lo, far_hi, query, heap, keep);
    }

    void gather_walk(size_t lo, size_t hi, const Vec3& query, double radius2,
                     std::vector<std::uint32_t>& out) const {
        if (lo >= hi) return;
        size_t mid = (lo + hi) / 2;
        const Node& node = nodes_[mid];
        const Vec3& p = dump_->photons[node.photon].position;
        if ((p - query).length_squared() <= radius2) out.push_back(node.photon);
        double delta = query[node.axis] - p[node.axis];
        if (delta <= 0.0 || delta * delta <= radius2)
            gather_walk(lo, mid, query, radius2, out);
        if (delta >= 0.0 || delta * delta <= radius2)
            gather_walk(mid + 1, hi, query, radius2, out);
    }

    struct Aabb3 {
        Vec3 lo{1e300, 1e300, 1e300};
        Vec3 hi{-1e300, -1e300, -1e300};
        void grow(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
        int widest_axis() const {
            Vec3 e = hi - lo;
            return e.x > e.y ? (e.x > e.z ? 0 : 2) : (e.y > e.z ? 1 : 2);
        }
    };

    std::shared_ptr<const PhotonDump> dump_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

/// Brute-force oracle with the same (distance, index) ordering contract.
/// Test-sized inputs only.
inline Neighborhood knn_brute_force(const PhotonDump& dump, const Vec3& query, size_t K) {
    std::vector<std::pair<double, std::uint32_t>> all;
    all.reserve(dump.photons.size());
    for (std::uint32_t i = 0; i < dump.photons.size(); ++i)
        all.emplace_back((dump.photons[i].position - query).length_squared(), i);
    std::sort(all.begin(), all.end());
    if (all.size() > K) all.resize(K);
    Neighborhood nb;
    for (const auto& [d2, idx] : all) nb.photons.push_back({idx, std::sqrt(d2)});
    nb.r = nb.photons.empty() ? 0.0 : nb.photons.back().distance;
    return nb;
}

}  // namespace dpm

#include <catch2/catch_amalgamated.hpp>

#include <chrono>

#include "oracles.hpp"

using namespace dpm;

TEST_CASE("a one-photon map answers the trivial query") {
    PhotonDump dump;
    dump.n_paths = 1;
    Photon p;
    p.position = {1, 2, 3};
    p.flux = {1, 1, 1};
    p.dir = {0, 0, -1};
    dump.photons.push_back(p);
    PhotonMap map(dump);
    CHECK(map.size() == 1);
    Neighborhood nb = map.knn({1, 2, 3}, 1);
    REQUIRE(nb.k() == 1);
    CHECK(nb.photons[0].index == 0);
    CHECK(nb.photons[0].distance == 0.0);
    CHECK(nb.r == 0.0);
}

TEST_CASE("an empty dump is rejected") {
    PhotonDump dump;
    dump.n_paths = 1;
    CHECK_THROWS_AS(PhotonMap(dump), std::invalid_argument);
}

TEST_CASE("every photon is its own nearest neighbor") {
    RngStream rng(8, 0);
    PhotonDump dump = oracles::random_cloud(100000, rng);
    PhotonMap map(dump);
    bool ok = true;
    for (std::uint32_t i = 0; i < dump.photons.size() && ok; i += 7) {
        Neighborhood nb = map.knn(dump.photons[i].position, 1);
        // duplicates are impossible with continuous positions; index must match
        ok = nb.k() == 1 && nb.photons[0].distance == 0.0;
    }
    CHECK(ok);
}

TEST_CASE("knn matches brute force exactly, including duplicate positions") {
    RngStream rng(9, 0);
    PhotonDump dump = oracles::random_cloud(10000, rng);
    // inject exact duplicates so the (distance, index) tie-break is exercised
    for (int i = 0; i < 50; ++i) {
        Photon p = dump.photons[rng.next_below(10000)];
        dump.photons.push_back(p);
    }
    PhotonMap map(dump);
    for (int q = 0; q < 100; ++q) {
        Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        if (q % 10 == 0) query = dump.photons[rng.next_below(10050)].position;
        for (size_t K : {size_t(5), size_t(50), size_t(500)}) {
            Neighborhood a = map.knn(query, K);
            Neighborhood b = knn_brute_force(dump, query, K);
            REQUIRE(a.photons.size() == b.photons.size());
            for (size_t i = 0; i < a.photons.size(); ++i) {
                REQUIRE(a.photons[i].index == b.photons[i].index);
                REQUIRE(a.photons[i].distance == b.photons[i].distance);
            }
            REQUIRE(a.r == b.r);
        }
    }
}

TEST_CASE("asking for more neighbors than photons returns them all") {
    RngStream rng(10, 0);
    PhotonDump dump = oracles::random_cloud(37, rng);
    PhotonMap map(dump);
    Neighborhood nb = map.knn({0, 0, 0}, 500);
    CHECK(nb.k() == 37);
    CHECK(nb.r == nb.photons.back().distance);
}

TEST_CASE("neighborhoods are sorted with r the last distance") {
    RngStream rng(12, 0);
    PhotonDump dump = oracles::random_cloud(5000, rng);
    PhotonMap map(dump);
    for (int q = 0; q < 20; ++q) {
        Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Neighborhood nb = map.knn(query, 64);
        for (size_t i = 1; i < nb.photons.size(); ++i)
            REQUIRE(nb.photons[i - 1].distance <= nb.photons[i].distance);
        REQUIRE(nb.r == nb.photons.back().distance);
        for (const auto& ref : nb.photons) REQUIRE(ref.distance <= nb.r);
    }
}

TEST_CASE("query results do not depend on insertion order") {
    RngStream rng(13, 0);
    PhotonDump dump = oracles::random_cloud(4000, rng);
    PhotonDump shuffled = dump;
    for (size_t i = shuffled.photons.size() - 1; i > 0; --i)
        std::swap(shuffled.photons[i],
                  shuffled.photons[rng.next_below(static_cast<std::uint32_t>(i + 1))]);
    PhotonMap a(dump), b(shuffled);
    for (int q = 0; q < 50; ++q) {
        Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Neighborhood na = a.knn(query, 32);
        Neighborhood nb = b.knn(query, 32);
        REQUIRE(na.k() == nb.k());
        for (size_t i = 0; i < na.k(); ++i) {
            // indices differ after the shuffle; positions and distances agree
            REQUIRE(na.photons[i].distance == nb.photons[i].distance);
            REQUIRE(a.photon(na.photons[i].index).position ==
                    b.photon(nb.photons[i].index).position);
        }
    }
}

TEST_CASE("gather returns exactly the closed ball") {
    RngStream rng(14, 0);
    PhotonDump dump = oracles::random_cloud(8000, rng);
    PhotonMap map(dump);
    std::vector<std::uint32_t> found;
    for (int q = 0; q < 25; ++q) {
        Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double radius = rng.uniform(0.05, 0.5);
        map.gather(query, radius, found);
        std::set<std::uint32_t> got(found.begin(), found.end());
        REQUIRE(got.size() == found.size());
        for (std::uint32_t i = 0; i < dump.photons.size(); ++i) {
            bool inside = (dump.photons[i].position - query).length() <= radius;
            REQUIRE(got.count(i) == (inside ? 1u : 0u));
        }
    }
}

TEST_CASE("predicate-filtered knn equals brute force over the kept subset") {
    RngStream rng(15, 0);
    PhotonDump dump = oracles::random_cloud(6000, rng);
    PhotonMap map(dump);
    auto keep = [](std::uint32_t idx) { return idx % 3 != 0; };

    PhotonDump kept;
    kept.n_paths = dump.n_paths;
    std::vector<std::uint32_t> kept_to_full;
    for (std::uint32_t i = 0; i < dump.photons.size(); ++i)
        if (keep(i)) {
            kept.photons.push_back(dump.photons[i]);
            kept_to_full.push_back(i);
        }

    for (int q = 0; q < 30; ++q) {
        Vec3 query{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Neighborhood a = map.knn_if(query, 40, keep);
        Neighborhood b = knn_brute_force(kept, query, 40);
        REQUIRE(a.k() == b.k());
        for (size_t i = 0; i < a.k(); ++i) {
            REQUIRE(a.photons[i].index == kept_to_full[b.photons[i].index]);
            REQUIRE(a.photons[i].distance == b.photons[i].distance);
        }
    }
}

TEST_CASE("build scales subquadratically", "[slow]") {
    RngStream rng(16, 0);
    PhotonDump small = oracles::random_cloud(100000, rng);
    PhotonDump big = oracles::random_cloud(200000, rng);
    auto time_build = [](const PhotonDump& d) {
        double best = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            auto t0 = std::chrono::steady_clock::now();
            PhotonMap map(d);
            best = std::min(best, std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0).count());
        }
        return best;
    };
    double t1 = time_build(small);
    double t2 = time_build(big);
    CHECK(t2 / t1 < 3.0);
}

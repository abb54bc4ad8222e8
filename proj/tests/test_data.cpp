#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "quad/data.hpp"

using namespace quad;

namespace {

DatasetSpec basic_spec() {
    DatasetSpec spec;
    spec.num_modalities = 2;
    spec.num_classes = 3;
    spec.dims = {4, 6};
    spec.num_samples = 90;
    spec.separation = {2.0, 2.0};
    spec.seed = 11;
    return spec;
}

// Nearest class-center classifier, fitted on train, scored on test.
double nearest_centroid_accuracy(const Dataset& train, const Dataset& test) {
    std::vector<std::vector<double>> centers(train.num_classes);
    std::vector<int> counts(train.num_classes, 0);
    int total = 0;
    for (int d : train.dims) total += d;
    for (auto& c : centers) c.assign(total, 0.0);
    for (const auto& s : train.samples) {
        counts[s.label]++;
        int off = 0;
        for (const auto& f : s.features) {
            for (std::size_t j = 0; j < f.size(); ++j) centers[s.label][off + j] += f[j];
            off += static_cast<int>(f.size());
        }
    }
    for (int c = 0; c < train.num_classes; ++c)
        for (auto& v : centers[c]) v /= counts[c];

    long correct = 0;
    for (const auto& s : test.samples) {
        double best = 0;
        int best_c = -1;
        for (int c = 0; c < train.num_classes; ++c) {
            double dist = 0;
            int off = 0;
            for (const auto& f : s.features) {
                for (std::size_t j = 0; j < f.size(); ++j) {
                    double d = f[j] - centers[c][off + j];
                    dist += d * d;
                }
                off += static_cast<int>(f.size());
            }
            if (best_c < 0 || dist < best) {
                best = dist;
                best_c = c;
            }
        }
        if (best_c == s.label) ++correct;
    }
    return static_cast<double>(correct) / test.size();
}

std::string temp_path(const std::string& name) { return std::string("/tmp/quad_test_") + name; }

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic and balanced") {
    DatasetSpec spec = basic_spec();
    Dataset a = generate_synthetic(spec);
    Dataset b = generate_synthetic(spec);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.size() == 90);

    std::vector<int> counts(spec.num_classes, 0);
    for (const auto& s : a.samples) counts[s.label]++;
    int mn = *std::min_element(counts.begin(), counts.end());
    int mx = *std::max_element(counts.begin(), counts.end());
    CHECK(mx - mn <= 1);
}

TEST_CASE("zero separation means no class signal") {
    DatasetSpec spec = basic_spec();
    spec.separation = {0.0, 0.0};
    spec.num_samples = 1200;
    Dataset ds = generate_synthetic(spec);
    SplitResult sp = split(ds, {0.7, 0.15, 0.15}, 3);
    double acc = nearest_centroid_accuracy(sp.train, sp.test);
    // expected accuracy 1/C; allow generous sampling slack
    CHECK(acc < 1.0 / spec.num_classes + 0.12);
}

TEST_CASE("high separation is trivially separable for the centroid oracle") {
    DatasetSpec spec;
    spec.num_modalities = 3;
    spec.num_classes = 4;
    spec.dims = {32, 32, 32};
    spec.num_samples = 2000;
    spec.separation = {6.0, 6.0, 6.0};
    spec.seed = 17;
    Dataset ds = generate_synthetic(spec);
    SplitResult sp = split(ds, {0.7, 0.15, 0.15}, 3);
    CHECK(nearest_centroid_accuracy(sp.train, sp.test) >= 0.99);
}

TEST_CASE("invalid specs are rejected") {
    DatasetSpec spec = basic_spec();
    spec.num_classes = 1;
    CHECK_THROWS_AS(generate_synthetic(spec), DataError);
    spec = basic_spec();
    spec.dims = {4};
    CHECK_THROWS_AS(generate_synthetic(spec), DataError);
    spec = basic_spec();
    spec.num_samples = 2;
    CHECK_THROWS_AS(generate_synthetic(spec), DataError);
}

TEST_CASE("tabular loading round trip") {
    write_file(temp_path("m0.csv"), "1,2\n3,4\n5,6\n7,8\n9,10\n11,12\n13,14\n15,16\n17,18\n19,20\n");
    write_file(temp_path("m1.csv"), "1\n2\n3\n4\n5\n6\n7\n8\n9\n10\n");
    write_file(temp_path("m2.csv"), "0,0,1\n0,1,0\n1,0,0\n0,0,2\n0,2,0\n2,0,0\n1,1,1\n2,2,2\n3,3,3\n0,1,2\n");
    write_file(temp_path("labels.csv"), "0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n");

    Dataset ds =
        load_tabular({temp_path("m0.csv"), temp_path("m1.csv"), temp_path("m2.csv")}, temp_path("labels.csv"));
    CHECK(ds.size() == 10);
    CHECK(ds.num_modalities == 3);
    CHECK(ds.num_classes == 2);
    CHECK(ds.dims == std::vector<int>{2, 1, 3});
    CHECK(ds.samples[2].features[0][0] == 5.0);
}

TEST_CASE("tabular loading errors name files and counts") {
    write_file(temp_path("a.csv"), "1,2\n3,4\n");
    write_file(temp_path("b.csv"), "1\n2\n3\n");
    write_file(temp_path("l.csv"), "0\n1\n");
    CHECK_THROWS_WITH_AS(load_tabular({temp_path("a.csv"), temp_path("b.csv")}, temp_path("l.csv")),
                         doctest::Contains("row count mismatch"), DataError);

    write_file(temp_path("c.csv"), "1,x\n3,4\n");
    CHECK_THROWS_WITH_AS(load_tabular({temp_path("c.csv")}, temp_path("l.csv")), doctest::Contains("non-numeric"),
                         DataError);
}

TEST_CASE("constant feature column maps to zero under z-score") {
    write_file(temp_path("const.csv"), "5,1\n5,2\n5,3\n5,4\n5,5\n5,6\n");
    write_file(temp_path("const_l.csv"), "0\n1\n0\n1\n0\n1\n");
    Dataset ds = load_tabular({temp_path("const.csv")}, temp_path("const_l.csv"));
    Normalizer nz = Normalizer::fit(ds);
    CHECK(nz.stddev[0][0] == 1.0);  // degenerate variance rule
    Dataset out = nz.apply(ds);
    for (const auto& s : out.samples) CHECK(s.features[0][0] == 0.0);
}

TEST_CASE("noise: sigma zero is the identity") {
    Dataset ds = generate_synthetic(basic_spec());
    NoiseSpec ns;
    ns.modalities = {0, 1};
    ns.sigma = 0.0;
    ns.seed = 4;
    Dataset out = inject_noise(ds, ns);
    CHECK(out.fingerprint() == ds.fingerprint());
}

TEST_CASE("noise: fraction selects exactly floor(N/2) samples") {
    DatasetSpec spec = basic_spec();
    spec.num_samples = 91;
    Dataset ds = generate_synthetic(spec);
    NoiseSpec ns;
    ns.modalities = {0};
    ns.sigma = 1.0;
    ns.fraction = 0.5;
    ns.seed = 4;
    Dataset out = inject_noise(ds, ns);
    int modified = 0;
    for (int i = 0; i < ds.size(); ++i) {
        if (ds.samples[i].features[0] != out.samples[i].features[0]) ++modified;
        CHECK(ds.samples[i].features[1] == out.samples[i].features[1]);  // untouched modality bit-identical
    }
    CHECK(modified == 45);
}

TEST_CASE("noise: empirical residual std matches sigma") {
    DatasetSpec spec = basic_spec();
    spec.num_samples = 1500;
    Dataset ds = generate_synthetic(spec);
    NoiseSpec ns;
    ns.modalities = {0};
    ns.sigma = 5.0;
    ns.seed = 9;
    Dataset out = inject_noise(ds, ns);
    double sq = 0;
    long n = 0;
    for (int i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.samples[i].features[0].size(); ++j) {
            double r = out.samples[i].features[0][j] - ds.samples[i].features[0][j];
            sq += r * r;
            ++n;
        }
    double std_hat = std::sqrt(sq / n);
    CHECK(std_hat >= 4.8);
    CHECK(std_hat <= 5.2);
}

TEST_CASE("noise compositions: residual std adds in quadrature") {
    DatasetSpec spec = basic_spec();
    spec.num_samples = 1200;
    Dataset ds = generate_synthetic(spec);
    NoiseSpec n1;
    n1.modalities = {0};
    n1.sigma = 3.0;
    n1.seed = 1;
    NoiseSpec n2 = n1;
    n2.sigma = 4.0;
    n2.seed = 2;
    Dataset once = inject_noise(ds, n1);
    Dataset twice = inject_noise(once, n2);

    // a further injection with sigma 0 is the identity
    NoiseSpec zero = n1;
    zero.sigma = 0.0;
    CHECK(inject_noise(twice, zero).fingerprint() == twice.fingerprint());

    double sq = 0;
    long n = 0;
    for (int i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.samples[i].features[0].size(); ++j) {
            double r = twice.samples[i].features[0][j] - ds.samples[i].features[0][j];
            sq += r * r;
            ++n;
        }
    double expect = std::sqrt(3.0 * 3.0 + 4.0 * 4.0);
    double std_hat = std::sqrt(sq / n);
    CHECK(std_hat >= expect * 0.95);
    CHECK(std_hat <= expect * 1.05);
}

TEST_CASE("split sizes, determinism and stratification") {
    DatasetSpec spec = basic_spec();
    spec.num_classes = 2;
    spec.num_samples = 100;
    Dataset ds = generate_synthetic(spec);

    SplitResult a = split(ds, {0.8, 0.1, 0.1}, 21);
    CHECK(a.train.size() == 80);
    CHECK(a.val.size() == 10);
    CHECK(a.test.size() == 10);

    SplitResult b = split(ds, {0.8, 0.1, 0.1}, 21);
    CHECK(a.train.fingerprint() == b.train.fingerprint());
    CHECK(a.test.fingerprint() == b.test.fingerprint());

    // per-class proportions in train within +-1 sample of global proportions
    std::vector<int> global(ds.num_classes, 0), in_train(ds.num_classes, 0);
    for (const auto& s : ds.samples) global[s.label]++;
    for (const auto& s : a.train.samples) in_train[s.label]++;
    for (int c = 0; c < ds.num_classes; ++c) {
        double expected = 0.8 * global[c];
        CHECK(std::fabs(in_train[c] - expected) <= 1.0);
    }

    // disjoint and exhaustive
    CHECK(a.train.size() + a.val.size() + a.test.size() == ds.size());
}

TEST_CASE("split rejects bad ratios and tiny classes") {
    Dataset ds = generate_synthetic(basic_spec());
    CHECK_THROWS_AS(split(ds, {0.5, 0.2, 0.2}, 1), DataError);
    CHECK_THROWS_AS(split(ds, {0.8, 0.1}, 1), DataError);

    DatasetSpec spec = basic_spec();
    spec.num_samples = 5;  // some class has < 3 samples
    Dataset tiny = generate_synthetic(spec);
    CHECK_THROWS_AS(split(tiny, {0.34, 0.33, 0.33}, 1), DataError);
}

TEST_CASE("normalization statistics depend only on the training split") {
    Dataset ds = generate_synthetic(basic_spec());
    SplitResult sp = split(ds, {0.7, 0.15, 0.15}, 5);
    Normalizer before = Normalizer::fit(sp.train);
    // perturb test rows; fitted statistics must be bit-identical
    for (auto& s : sp.test.samples)
        for (auto& f : s.features)
            for (auto& v : f) v += 100.0;
    Normalizer after = Normalizer::fit(sp.train);
    CHECK(before.mean == after.mean);
    CHECK(before.stddev == after.stddev);
}

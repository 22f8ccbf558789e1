// Kernel benchmark: serial reference vs OpenMP-parallel paths.
#include <chrono>
#include <cstdio>
#include <functional>

#include "psi/model.hpp"
#include "psi/rng.hpp"
#include "psi/shapley.hpp"

using namespace psi;
using clock_type = std::chrono::steady_clock;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto start = clock_type::now();
    for (int r = 0; r < reps; ++r) fn();
    return std::chrono::duration<double>(clock_type::now() - start).count() /
           static_cast<double>(reps);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
    return m;
}

} // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    if (threads <= 0) threads = 4;

    Rng rng(7);
    std::printf("%-32s %12s %12s %8s\n", "kernel", "serial (s)", "parallel (s)", "speedup");

    for (std::size_t size : {128, 256, 512}) {
        Matrix a = random_matrix(size, size, rng);
        Matrix b = random_matrix(size, size, rng);
        set_max_threads(1);
        const double t_serial = time_of([&] { matmul_serial(a, b); }, 5);
        set_max_threads(threads);
        const double t_parallel = time_of([&] { matmul(a, b); }, 5);
        Matrix ref = matmul_serial(a, b);
        Matrix par = matmul(a, b);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (ref[i] != par[i]) {
                std::fprintf(stderr, "parallel matmul diverged from serial reference\n");
                return 1;
            }
        }
        char label[64];
        std::snprintf(label, sizeof(label), "matmul %zux%zu", size, size);
        std::printf("%-32s %12.6f %12.6f %7.2fx\n", label, t_serial, t_parallel,
                    t_serial / t_parallel);
    }

    // Batched model forward, the inner loop of training and evaluation.
    ModelConfig cfg;
    cfg.feature_count = 3;
    cfg.embed_dim = 16;
    cfg.menn_hidden = {60, 60};
    PsiModel model = PsiModel::build(cfg);
    Matrix batch = random_matrix(512, 3, rng);
    Matrix mask(512, 3, 1.0);
    set_max_threads(1);
    const double f_serial = time_of([&] { model.forward(batch, mask); }, 10);
    set_max_threads(threads);
    const double f_parallel = time_of([&] { model.forward(batch, mask); }, 10);
    std::printf("%-32s %12.6f %12.6f %7.2fx\n", "model forward (512 rows)", f_serial,
                f_parallel, f_serial / f_parallel);

    // Exact Shapley enumeration (batched 2^D coalition forwards).
    ModelConfig big = cfg;
    big.feature_count = 10;
    big.menn_hidden = {40, 40};
    big.embed_dim = 4;
    PsiModel wide = PsiModel::build(big);
    std::vector<double> x(10, 0.3);
    set_max_threads(1);
    const double s_serial = time_of([&] { exact_shapley_all(wide, x); }, 3);
    set_max_threads(threads);
    const double s_parallel = time_of([&] { exact_shapley_all(wide, x); }, 3);
    std::printf("%-32s %12.6f %12.6f %7.2fx\n", "exact shapley (D=10)", s_serial, s_parallel,
                s_serial / s_parallel);
    return 0;
}

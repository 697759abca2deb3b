#include "mim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mim/rng.hpp"

namespace fs = std::filesystem;

namespace mim::data {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> gaussian_matrix(Rng& rng, std::size_t n, double std_dev) {
    std::vector<double> m(n * n);
    for (double& v : m) v = rng.normal(0.0, std_dev);
    return m;
}

void rescale_to_radius(std::vector<double>& a, std::size_t n, double rho) {
    const double r = spectral_radius(a, n);
    if (r == 0.0) return;
    const double f = rho / r;
    for (double& v : a) v *= f;
}

SubjectSeries simulate_var(const SynthConfig& cfg, const std::vector<double>& a,
                           Rng& rng, const std::string& id) {
    const std::size_t r = cfg.regions, t_len = cfg.timepoints;
    Tensor series = Tensor::zeros({r, t_len});
    std::vector<double> x(r, 0.0), next(r, 0.0);
    for (std::size_t step = 0; step < cfg.burn_in + t_len; ++step) {
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            const double* row = a.data() + i * r;
            for (std::size_t j = 0; j < r; ++j) s += row[j] * x[j];
            next[i] = s + (cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0);
        }
        std::swap(x, next);
        if (step >= cfg.burn_in) {
            const std::size_t col = step - cfg.burn_in;
            for (std::size_t i = 0; i < r; ++i) series.at(i, col) = x[i];
        }
    }
    SubjectSeries subj;
    subj.subject_id = id;
    subj.series = series;
    return subj;
}

} // namespace

void SynthConfig::validate(bool labeled) const {
    if (regions < 2) throw ConfigError("synth: need at least 2 regions");
    if (timepoints < 2) throw ConfigError("synth: need at least 2 timepoints");
    if (!(rho < 1.0)) {
        throw ConfigError("synth: spectral radius rho must be < 1 for a stationary process, got " +
                          std::to_string(rho));
    }
    if (rho <= 0.0) throw ConfigError("synth: rho must be positive");
    if (labeled && (block_size == 0 || 2 * block_size > regions)) {
        throw ConfigError("synth: block_size must satisfy 0 < 2*block_size <= regions");
    }
    if (noise_std < 0.0) throw ConfigError("synth: noise_std must be non-negative");
}

double spectral_radius(const std::vector<double>& a, std::size_t n) {
    if (a.size() != n * n) throw ShapeError("spectral_radius: matrix size mismatch");
    auto frob = [n](const std::vector<double>& m) {
        double s = 0.0;
        for (double v : m) s += v * v;
        return std::sqrt(s);
    };
    double norm = frob(a);
    if (norm == 0.0) return 0.0;
    // Represent A^(2^i) = exp(log_scale) * M with ||M||_F = 1.
    std::vector<double> m(a);
    for (double& v : m) v /= norm;
    double log_scale = std::log(norm);
    std::vector<double> sq(n * n);
    const int steps = 40;
    for (int it = 0; it < steps; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += m[i * n + k] * m[k * n + j];
                sq[i * n + j] = s;
            }
        }
        const double c = frob(sq);
        if (c == 0.0) return 0.0; // nilpotent
        for (std::size_t i = 0; i < n * n; ++i) m[i] = sq[i] / c;
        log_scale = 2.0 * log_scale + std::log(c);
    }
    return std::exp(log_scale / std::pow(2.0, steps));
}

std::vector<SubjectSeries> generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t r = cfg.regions;
    Rng base_rng(Rng::derive(cfg.seed, "synth/base"));
    const std::vector<double> base = gaussian_matrix(base_rng, r, 1.0 / std::sqrt(double(r)));

    std::vector<std::vector<double>> coupling(2, base);
    // Class 1: additive perturbation on the off-diagonal block
    // rows [0, block) x cols [block, 2*block).
    for (std::size_t i = 0; i < cfg.block_size; ++i) {
        for (std::size_t j = cfg.block_size; j < 2 * cfg.block_size; ++j) {
            coupling[1][i * r + j] += cfg.block_delta;
        }
    }
    rescale_to_radius(coupling[0], r, cfg.rho);
    rescale_to_radius(coupling[1], r, cfg.rho);

    std::vector<SubjectSeries> out;
    out.reserve(2 * cfg.subjects_per_class);
    for (int cls = 0; cls < 2; ++cls) {
        for (std::size_t s = 0; s < cfg.subjects_per_class; ++s) {
            char id[32];
            std::snprintf(id, sizeof(id), "c%d_%04zu", cls, s);
            Rng rng(Rng::derive(cfg.seed, "synth/labeled", cls * 1000003ULL + s));
            SubjectSeries subj = simulate_var(cfg, coupling[cls], rng, id);
            subj.label = cls;
            out.push_back(std::move(subj));
        }
    }
    return out;
}

std::vector<SubjectSeries> generate_unlabeled(const SynthConfig& cfg, std::size_t count) {
    cfg.validate(false);
    const std::size_t r = cfg.regions;
    std::vector<SubjectSeries> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        Rng mat_rng(Rng::derive(cfg.seed, "synth/unlabeled_base", s));
        std::vector<double> a = gaussian_matrix(mat_rng, r, 1.0 / std::sqrt(double(r)));
        rescale_to_radius(a, r, cfg.rho);
        char id[32];
        std::snprintf(id, sizeof(id), "u%05zu", s);
        Rng rng(Rng::derive(cfg.seed, "synth/unlabeled", s));
        out.push_back(simulate_var(cfg, a, rng, id));
    }
    return out;
}

SubjectSeries zscore(const SubjectSeries& subject) {
    const std::size_t r = subject.regions(), t = subject.timepoints();
    SubjectSeries out;
    out.subject_id = subject.subject_id;
    out.label = subject.label;
    out.split = subject.split;
    out.series = Tensor::zeros({r, t});
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < t; ++j) mean += subject.series(i, j);
        mean /= static_cast<double>(t);
        double var = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
            const double d = subject.series(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(t);
        if (var == 0.0) {
            throw DataError("zscore: zero-variance region " + std::to_string(i) +
                            " in subject " + subject.subject_id);
        }
        const double inv_std = 1.0 / std::sqrt(var);
        for (std::size_t j = 0; j < t; ++j) {
            out.series.at(i, j) = (subject.series(i, j) - mean) * inv_std;
        }
    }
    return out;
}

std::vector<double> fnc_features(const SubjectSeries& subject) {
    const std::size_t r = subject.regions(), t = subject.timepoints();
    std::vector<double> mean(r, 0.0), ss(r, 0.0);
    std::vector<std::vector<double>> centered(r, std::vector<double>(t));
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < t; ++j) mean[i] += subject.series(i, j);
        mean[i] /= static_cast<double>(t);
        for (std::size_t j = 0; j < t; ++j) {
            centered[i][j] = subject.series(i, j) - mean[i];
            ss[i] += centered[i][j] * centered[i][j];
        }
        if (ss[i] == 0.0) {
            throw DataError("fnc_features: zero-variance region " + std::to_string(i) +
                            " in subject " + subject.subject_id);
        }
    }
    std::vector<double> out;
    out.reserve(r * (r - 1) / 2);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = i + 1; j < r; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < t; ++k) dot += centered[i][k] * centered[j][k];
            out.push_back(dot / std::sqrt(ss[i] * ss[j]));
        }
    }
    return out;
}

std::vector<double> raw_features(const SubjectSeries& subject) {
    auto v = subject.series.values();
    return {v.begin(), v.end()};
}

std::string save_dataset(const std::vector<SubjectSeries>& subjects, const std::string& dir) {
    fs::create_directories(dir);
    std::set<std::string> seen;
    for (const SubjectSeries& s : subjects) {
        if (!seen.insert(s.subject_id).second) {
            throw DataError("save_dataset: duplicate subject_id " + s.subject_id);
        }
    }
    std::ostringstream manifest;
    for (const SubjectSeries& s : subjects) {
        const std::string fname = s.subject_id + ".csv";
        std::ofstream f(fs::path(dir) / fname);
        if (!f) throw IoError("save_dataset: cannot write " + fname);
        for (std::size_t i = 0; i < s.regions(); ++i) {
            for (std::size_t j = 0; j < s.timepoints(); ++j) {
                if (j) f << ',';
                f << format_double(s.series(i, j));
            }
            f << '\n';
        }
        manifest << s.subject_id << ',' << fname;
        if (s.label) manifest << ',' << *s.label;
        if (s.split) manifest << ',' << *s.split;
        manifest << '\n';
    }
    const std::string manifest_path = (fs::path(dir) / "manifest.csv").string();
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("save_dataset: cannot write manifest at " + manifest_path);
    mf << manifest.str();
    return manifest_path;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

Tensor load_subject_csv(const std::string& path, const std::string& subject_id) {
    std::ifstream f(path);
    if (!f) {
        throw IoError("load_dataset: missing file " + path + " for subject " + subject_id);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line, ',');
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') {
                throw DataError("load_dataset: non-numeric cell '" + cell + "' at row " +
                                std::to_string(rows.size()) + " col " + std::to_string(c) +
                                " of subject " + subject_id);
            }
            if (!std::isfinite(v)) {
                throw DataError("load_dataset: non-finite value at row " +
                                std::to_string(rows.size()) + " of subject " + subject_id);
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DataError("load_dataset: ragged row " + std::to_string(rows.size()) +
                            " in subject " + subject_id + " (" + std::to_string(row.size()) +
                            " vs " + std::to_string(rows.front().size()) + " columns)");
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) {
        throw DataError("load_dataset: subject " + subject_id + " has fewer than 2 regions");
    }
    const std::size_t r = rows.size(), t = rows.front().size();
    Tensor series = Tensor::zeros({r, t});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < t; ++j) series.at(i, j) = rows[i][j];
    }
    return series;
}

} // namespace

std::vector<SubjectSeries> load_dataset(const std::string& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("load_dataset: cannot open manifest " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<SubjectSeries> out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(mf, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_line(line, ',');
        if (fields.size() < 2 || fields.size() > 4) {
            throw DataError("load_dataset: manifest line " + std::to_string(lineno) +
                            " must be subject_id,path[,label][,split]");
        }
        SubjectSeries subj;
        subj.subject_id = fields[0];
        if (!seen.insert(subj.subject_id).second) {
            throw DataError("load_dataset: duplicate subject_id " + subj.subject_id);
        }
        for (std::size_t i = 2; i < fields.size(); ++i) {
            const std::string& tok = fields[i];
            if (tok == "0" || tok == "1") {
                subj.label = tok == "1" ? 1 : 0;
            } else if (tok == "train" || tok == "val" || tok == "test") {
                subj.split = tok;
            } else {
                throw DataError("load_dataset: unrecognized manifest field '" + tok +
                                "' on line " + std::to_string(lineno) +
                                " (label must be 0/1, split train/val/test)");
            }
        }
        subj.series = load_subject_csv((base / fields[1]).string(), subj.subject_id);
        out.push_back(std::move(subj));
    }
    for (const SubjectSeries& s : out) {
        if (s.regions() != out.front().regions() || s.timepoints() != out.front().timepoints()) {
            throw DataError("load_dataset: heterogeneous shapes, subject " + s.subject_id +
                            " is " + shape_str(s.series.shape()) + " but subject " +
                            out.front().subject_id + " is " +
                            shape_str(out.front().series.shape()));
        }
    }
    return out;
}

} // namespace mim::data

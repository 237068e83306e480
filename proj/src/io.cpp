#include "mmdg/io.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mmdg {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_samples_csv(const std::filesystem::path& path, const Batch& batch) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    const Eigen::Index d = batch.dim();
    for (Eigen::Index c = 0; c < d; ++c) out << (c ? "," : "") << "z" << c;
    if (batch.prompts) {
        for (Eigen::Index c = 0; c < batch.prompts->cols(); ++c) out << ",p" << c;
    }
    out << "\n";
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        for (Eigen::Index c = 0; c < d; ++c) {
            out << (c ? "," : "") << format_double(batch.data(i, c));
        }
        if (batch.prompts) {
            for (Eigen::Index c = 0; c < batch.prompts->cols(); ++c) {
                out << "," << format_double((*batch.prompts)(i, c));
            }
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Batch read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path.string());

    int d = 0, dp = 0;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) {
            if (col.rfind('z', 0) == 0) {
                ++d;
            } else if (col.rfind('p', 0) == 0) {
                ++dp;
            } else {
                throw std::runtime_error("unexpected column '" + col + "' in " + path.string());
            }
        }
    }
    if (d == 0) throw std::runtime_error("no sample columns in " + path.string());

    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        int got = 0;
        while (std::getline(row, cell, ',')) {
            size_t used = 0;
            values.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::runtime_error("bad number '" + cell + "'");
            ++got;
        }
        if (got != d + dp) throw std::runtime_error("ragged row in " + path.string());
        ++rows;
    }
    if (rows == 0) throw std::runtime_error("no samples in " + path.string());

    Batch batch(Eigen::MatrixXd(rows, d));
    if (dp > 0) batch.prompts = Eigen::MatrixXd(rows, dp);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const size_t base = static_cast<size_t>(i) * static_cast<size_t>(d + dp);
        for (int c = 0; c < d; ++c) batch.data(i, c) = values[base + static_cast<size_t>(c)];
        for (int c = 0; c < dp; ++c) {
            (*batch.prompts)(i, c) = values[base + static_cast<size_t>(d + c)];
        }
    }
    return batch;
}

void write_scatter_svg(const std::filesystem::path& path,
                       const std::vector<ScatterSeries>& series) {
    double lo = -1.0, hi = 1.0;
    for (const auto& s : series) {
        for (Eigen::Index i = 0; i < s.batch->size(); ++i) {
            lo = std::min({lo, s.batch->data(i, 0), s.batch->data(i, 1)});
            hi = std::max({hi, s.batch->data(i, 0), s.batch->data(i, 1)});
        }
    }
    const double span = hi - lo;
    const double pad = 0.05 * span;
    const double scale = 500.0 / (span + 2.0 * pad);
    auto sx = [&](double x) { return (x - lo + pad) * scale + 25.0; };
    auto sy = [&](double y) { return 525.0 - (y - lo + pad) * scale; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"550\" height=\"550\" "
           "viewBox=\"0 0 550 550\">\n";
    out << "<rect width=\"550\" height=\"550\" fill=\"white\"/>\n";
    double ly = 20.0;
    for (const auto& s : series) {
        out << "<g fill=\"" << s.color << "\" fill-opacity=\"0.6\">\n";
        for (Eigen::Index i = 0; i < s.batch->size(); ++i) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\"/>\n",
                          sx(s.batch->data(i, 0)), sy(s.batch->data(i, 1)));
            out << buf;
        }
        out << "</g>\n";
        out << "<circle cx=\"15\" cy=\"" << ly << "\" r=\"4\" fill=\"" << s.color << "\"/>"
            << "<text x=\"25\" y=\"" << ly + 4.0 << "\" font-family=\"sans-serif\" "
            << "font-size=\"13\">" << s.label << "</text>\n";
        ly += 18.0;
    }
    out << "</svg>\n";
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return nlohmann::json::parse(in);
}

RunManifest::RunManifest(nlohmann::json config, std::uint64_t seed, bool with_timings)
    : with_timings_(with_timings) {
    manifest_["config_hash"] = std::hash<std::string>{}(config.dump());
    manifest_["seed"] = seed;
    manifest_["versions"] = {{"mmdg", "0.1.0"}, {"eigen", EIGEN_WORLD_VERSION * 10000 +
                                                              EIGEN_MAJOR_VERSION * 100 +
                                                              EIGEN_MINOR_VERSION}};
    manifest_["files"] = nlohmann::json::array();
    if (with_timings_) manifest_["timings"] = nlohmann::json::object();
}

void RunManifest::add_file(const std::filesystem::path& path) {
    manifest_["files"].push_back(path.filename().string());
}

void RunManifest::add_timing(const std::string& phase, double seconds) {
    if (with_timings_) manifest_["timings"][phase] = seconds;
}

void RunManifest::write(const std::filesystem::path& path) const {
    write_json(path, manifest_);
}

}  // namespace mmdg

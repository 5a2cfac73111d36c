#include "xfrl/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "xfrl/error.hpp"

namespace xfrl::rep {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open output file: " + path.string());
    return f;
}

}  // namespace

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_train_log(const std::filesystem::path& path, const std::vector<std::size_t>& tap_ids,
                     const std::vector<EpochRow>& rows) {
    std::ofstream f = open_out(path);
    f << "epoch,loss_cls";
    for (std::size_t id : tap_ids) f << ",mmd_l" << id;
    f << ",loss_total,test_acc\n";
    for (const EpochRow& r : rows) {
        f << r.epoch << ',' << fmt(r.loss_cls);
        for (double m : r.mmd) f << ',' << fmt(m);
        f << ',' << fmt(r.loss_total) << ',';
        if (r.test_acc >= 0.0) f << fmt(r.test_acc);
        f << '\n';
    }
    if (!f) throw io_error("failed writing " + path.string());
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream f = open_out(path);
    f << "k,accuracy,relative_accuracy\n";
    for (const SweepRow& r : rows)
        f << r.k << ',' << fmt(r.accuracy) << ',' << fmt(r.relative) << '\n';
    if (!f) throw io_error("failed writing " + path.string());
}

void write_sweep_svg(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    if (rows.empty()) throw value_error("sweep plot needs at least one row");
    const double W = 640, H = 400, ml = 60, mr = 20, mt = 20, mb = 44;
    const double pw = W - ml - mr, ph = H - mt - mb;
    std::size_t kmax = 0;
    double amax = 0.0;
    for (const SweepRow& r : rows) {
        kmax = std::max(kmax, r.k);
        amax = std::max(amax, r.accuracy);
    }
    if (amax <= 0.0) amax = 1.0;
    const double ytop = std::min(1.0, amax * 1.1 + 1e-12);
    auto X = [&](double k) { return ml + (kmax == 0 ? 0.0 : k / double(kmax)) * pw; };
    auto Y = [&](double a) { return mt + ph - (a / ytop) * ph; };  // axis anchored at zero

    std::ofstream f = open_out(path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
      << "\" viewBox=\"0 0 " << fmt(W) << " " << fmt(H) << "\">\n";
    f << "<rect width=\"" << fmt(W) << "\" height=\"" << fmt(H) << "\" fill=\"white\"/>\n";
    f << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(ml + pw)
      << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(ml) << "\" y2=\""
      << fmt(mt + ph) << "\" stroke=\"black\"/>\n";
    for (std::size_t k = 0; k <= kmax; ++k) {
        f << "<text x=\"" << fmt(X(double(k))) << "\" y=\"" << fmt(mt + ph + 18)
          << "\" font-size=\"12\" text-anchor=\"middle\">" << k << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double a = ytop * i / 4.0;
        f << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(Y(a) + 4)
          << "\" font-size=\"12\" text-anchor=\"end\">" << fmt(a) << "</text>\n";
        f << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(Y(a)) << "\" x2=\"" << fmt(ml + pw)
          << "\" y2=\"" << fmt(Y(a)) << "\" stroke=\"#dddddd\"/>\n";
    }
    f << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(H - 8)
      << "\" font-size=\"13\" text-anchor=\"middle\">transferred layers k (0 = scratch)</text>\n";
    f << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i) f << ' ';
        f << fmt(X(double(rows[i].k))) << ',' << fmt(Y(rows[i].accuracy));
    }
    f << "\"/>\n";
    for (const SweepRow& r : rows)
        f << "<circle cx=\"" << fmt(X(double(r.k))) << "\" cy=\"" << fmt(Y(r.accuracy))
          << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    f << "</svg>\n";
    if (!f) throw io_error("failed writing " + path.string());
}

}  // namespace xfrl::rep

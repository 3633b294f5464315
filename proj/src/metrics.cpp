#include "fade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "fade/assignment.hpp"
#include "fade/common.hpp"

namespace fade {

namespace {

constexpr double kIneligible = 1e6;
constexpr double kIdIou = 0.5;  // identity metrics and switch counting

struct FrameBoxes {
    std::vector<int> traj;  // index into trajectory list
    std::vector<BoxPx> box;
};

using FrameMap = std::map<int, FrameBoxes>;

FrameMap index_by_frame(const std::vector<Trajectory>& ts) {
    FrameMap out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        int last = -1;
        bool first = true;
        for (const TrackPoint& p : ts[i].points) {
            if (!first && p.frame <= last)
                throw DataError("trajectory id " + std::to_string(ts[i].id) +
                                ": frames not strictly increasing");
            first = false;
            last = p.frame;
            FrameBoxes& fb = out[p.frame];
            fb.traj.push_back(static_cast<int>(i));
            fb.box.push_back(p.box);
        }
    }
    return out;
}

// per-frame matching: maximize pairs with IoU >= alpha, then minimize
// total (1 - IoU); the ineligible sentinel dominates any eligible total
std::vector<std::pair<int, int>> match_frame(const FrameBoxes& g, const FrameBoxes& p,
                                             double alpha) {
    std::vector<std::pair<int, int>> pairs;
    int m = static_cast<int>(g.box.size()), n = static_cast<int>(p.box.size());
    if (m == 0 || n == 0) return pairs;
    std::vector<double> cost(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double v = iou(g.box[i], p.box[j]);
            cost[static_cast<std::size_t>(i) * n + j] = v >= alpha ? 1.0 - v : kIneligible;
        }
    Assignment a = hungarian_solve(cost, m, n);
    for (int i = 0; i < m; ++i) {
        int j = a.row_to_col[static_cast<std::size_t>(i)];
        if (j >= 0 && cost[static_cast<std::size_t>(i) * n + j] < kIneligible / 2)
            pairs.emplace_back(g.traj[static_cast<std::size_t>(i)],
                               p.traj[static_cast<std::size_t>(j)]);
    }
    return pairs;
}

}  // namespace

std::vector<double> default_alpha_grid() {
    std::vector<double> out;
    for (int i = 1; i <= 19; ++i) out.push_back(0.05 * i);
    return out;
}

EvalReport evaluate(const std::vector<Trajectory>& gt, const std::vector<Trajectory>& pred,
                    const std::vector<double>& alphas) {
    FrameMap gtf = index_by_frame(gt);
    FrameMap prf = index_by_frame(pred);
    std::set<int> frames;
    for (auto& [f, _] : gtf) frames.insert(f);
    for (auto& [f, _] : prf) frames.insert(f);

    std::size_t gt_boxes = 0, pred_boxes = 0;
    for (const auto& t : gt) gt_boxes += t.points.size();
    for (const auto& t : pred) pred_boxes += t.points.size();

    EvalReport rep;
    rep.alphas = alphas;

    for (double alpha : alphas) {
        long tp = 0;
        // co-occurrence counts between gt and pred trajectories at this alpha
        std::map<std::pair<int, int>, long> pair_count;
        std::vector<long> gt_matched(gt.size(), 0), pr_matched(pred.size(), 0);
        for (int f : frames) {
            static const FrameBoxes empty;
            const FrameBoxes& g = gtf.count(f) ? gtf[f] : empty;
            const FrameBoxes& p = prf.count(f) ? prf[f] : empty;
            for (auto [gi, pj] : match_frame(g, p, alpha)) {
                ++tp;
                ++pair_count[{gi, pj}];
                ++gt_matched[static_cast<std::size_t>(gi)];
                ++pr_matched[static_cast<std::size_t>(pj)];
            }
        }
        long fn = static_cast<long>(gt_boxes) - tp;
        long fp = static_cast<long>(pred_boxes) - tp;

        double deta = (tp + fn + fp) > 0 ? double(tp) / double(tp + fn + fp) : 1.0;
        // association purity per true positive: frames this (gt,pred) pair held
        // together vs frames either side spent matched to someone else
        double assa = 1.0;
        if (tp > 0) {
            double acc = 0.0;
            for (auto& [key, tpa] : pair_count) {
                long fna = gt_matched[static_cast<std::size_t>(key.first)] - tpa;
                long fpa = pr_matched[static_cast<std::size_t>(key.second)] - tpa;
                acc += double(tpa) * (double(tpa) / double(tpa + fna + fpa));
            }
            assa = acc / double(tp);
        }
        rep.deta_alpha.push_back(deta);
        rep.assa_alpha.push_back(assa);
        rep.hota_alpha.push_back(std::sqrt(deta * assa));
    }

    double sum_h = 0, sum_d = 0, sum_a = 0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        sum_h += rep.hota_alpha[i];
        sum_d += rep.deta_alpha[i];
        sum_a += rep.assa_alpha[i];
    }
    std::size_t k = std::max<std::size_t>(1, alphas.size());
    rep.hota = sum_h / double(k);
    rep.deta = sum_d / double(k);
    rep.assa = sum_a / double(k);

    // ---- identity metrics: one global trajectory-level matching ----
    {
        int m = static_cast<int>(gt.size()), n = static_cast<int>(pred.size());
        long idtp = 0;
        if (m > 0 && n > 0) {
            std::vector<double> cost(static_cast<std::size_t>(m) * n, 0.0);
            for (int i = 0; i < m; ++i) {
                std::map<int, BoxPx> gmap;
                for (const TrackPoint& p : gt[static_cast<std::size_t>(i)].points)
                    gmap[p.frame] = p.box;
                for (int j = 0; j < n; ++j) {
                    long overlap = 0;
                    for (const TrackPoint& q : pred[static_cast<std::size_t>(j)].points) {
                        auto it = gmap.find(q.frame);
                        if (it != gmap.end() && iou(it->second, q.box) >= kIdIou) ++overlap;
                    }
                    cost[static_cast<std::size_t>(i) * n + j] = -double(overlap);
                }
            }
            Assignment a = hungarian_solve(cost, m, n);
            idtp = static_cast<long>(std::llround(-a.total_cost));
        }
        long idfn = static_cast<long>(gt_boxes) - idtp;
        long idfp = static_cast<long>(pred_boxes) - idtp;
        rep.idf1 = (2 * idtp + idfn + idfp) > 0
                       ? 2.0 * double(idtp) / double(2 * idtp + idfn + idfp)
                       : 1.0;
        rep.idr = (idtp + idfn) > 0 ? double(idtp) / double(idtp + idfn) : 1.0;
        rep.idp = (idtp + idfp) > 0 ? double(idtp) / double(idtp + idfp) : 1.0;
    }

    // ---- identity switches, CLEAR-style with match continuity ----
    {
        std::map<int, int> last_match;  // gt traj -> pred traj
        int switches = 0;
        static const FrameBoxes empty;
        for (int f : frames) {
            const FrameBoxes& g = gtf.count(f) ? gtf[f] : empty;
            const FrameBoxes& p = prf.count(f) ? prf[f] : empty;
            if (g.box.empty()) continue;
            std::vector<int> g_left, p_left;
            std::vector<char> p_used(p.box.size(), 0);
            std::vector<std::pair<int, int>> matches;
            // continuity first: keep last frame's pairing while it still holds
            for (std::size_t i = 0; i < g.box.size(); ++i) {
                int gi = g.traj[i];
                auto it = last_match.find(gi);
                bool kept = false;
                if (it != last_match.end()) {
                    for (std::size_t j = 0; j < p.box.size(); ++j) {
                        if (p.traj[j] == it->second && !p_used[j] &&
                            iou(g.box[i], p.box[j]) >= kIdIou) {
                            matches.emplace_back(gi, p.traj[j]);
                            p_used[j] = 1;
                            kept = true;
                            break;
                        }
                    }
                }
                if (!kept) g_left.push_back(static_cast<int>(i));
            }
            for (std::size_t j = 0; j < p.box.size(); ++j)
                if (!p_used[j]) p_left.push_back(static_cast<int>(j));
            if (!g_left.empty() && !p_left.empty()) {
                int m = static_cast<int>(g_left.size()), n = static_cast<int>(p_left.size());
                std::vector<double> cost(static_cast<std::size_t>(m) * n);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        double v = iou(g.box[static_cast<std::size_t>(g_left[i])],
                                       p.box[static_cast<std::size_t>(p_left[j])]);
                        cost[static_cast<std::size_t>(i) * n + j] =
                            v >= kIdIou ? 1.0 - v : kIneligible;
                    }
                Assignment a = hungarian_solve(cost, m, n);
                for (int i = 0; i < m; ++i) {
                    int j = a.row_to_col[static_cast<std::size_t>(i)];
                    if (j >= 0 && cost[static_cast<std::size_t>(i) * n + j] < kIneligible / 2)
                        matches.emplace_back(g.traj[static_cast<std::size_t>(g_left[i])],
                                             p.traj[static_cast<std::size_t>(p_left[j])]);
                }
            }
            for (auto [gi, pj] : matches) {
                auto it = last_match.find(gi);
                if (it != last_match.end() && it->second != pj) ++switches;
                last_match[gi] = pj;
            }
        }
        rep.idsw = switches;
        rep.idsw_per_track = gt.empty() ? 0.0 : double(switches) / double(gt.size());
    }

    return rep;
}

std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %7s %7s %7s %7s %7s %7s %6s %10s\n", "label",
                  "HOTA", "DetA", "AssA", "IDF1", "IDR", "IDP", "IDSW", "IDSW/trk");
    out += line;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const EvalReport& e = rows[r].second;
        std::snprintf(line, sizeof(line), "%-20s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f %6d %10.3f\n",
                      rows[r].first.c_str(), e.hota, e.deta, e.assa, e.idf1, e.idr, e.idp, e.idsw,
                      e.idsw_per_track);
        out += line;
        if (r > 0) {
            const EvalReport& c = rows[0].second;
            std::snprintf(line, sizeof(line),
                          "%-20s %+7.4f %+7.4f %+7.4f %+7.4f %+7.4f %+7.4f %+6d %+10.3f\n",
                          "  delta vs first", e.hota - c.hota, e.deta - c.deta, e.assa - c.assa,
                          e.idf1 - c.idf1, e.idr - c.idr, e.idp - c.idp, e.idsw - c.idsw,
                          e.idsw_per_track - c.idsw_per_track);
            out += line;
        }
    }
    return out;
}

}  // namespace fade

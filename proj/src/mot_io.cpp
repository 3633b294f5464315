#include "fade/mot_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "fade/common.hpp"
#include "fade/image.hpp"

namespace fade {

std::string fmt_double(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

std::string format_mot(const std::vector<Trajectory>& trajectories) {
    // rows sorted by frame then id, the conventional file order
    struct Row {
        int frame, id;
        BoxPx box;
    };
    std::vector<Row> rows;
    for (const Trajectory& t : trajectories)
        for (const TrackPoint& p : t.points) rows.push_back({p.frame, t.id, p.box});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
    });
    std::string out;
    for (const Row& r : rows) {
        out += std::to_string(r.frame) + "," + std::to_string(r.id) + "," + fmt_double(r.box.x) +
               "," + fmt_double(r.box.y) + "," + fmt_double(r.box.w) + "," + fmt_double(r.box.h) +
               ",1,1,1\n";
    }
    return out;
}

void write_mot(const std::vector<Trajectory>& trajectories, const std::string& path) {
    write_file_atomic(path, format_mot(trajectories));
}

std::vector<Trajectory> parse_mot_text(const std::string& text, const std::string& origin) {
    std::map<int, Trajectory> by_id;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // tolerate trailing \r and blank lines
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        fields.push_back(cur);
        if (fields.size() < 6)
            throw DataError(origin + ":" + std::to_string(lineno) +
                            ": malformed row (need at least 6 comma-separated fields)");
        auto to_int = [&](const std::string& s, const char* what) {
            char* end = nullptr;
            long v = std::strtol(s.c_str(), &end, 10);
            if (end == s.c_str() || *end != '\0')
                throw DataError(origin + ":" + std::to_string(lineno) + ": bad " + what + " '" +
                                s + "'");
            return static_cast<int>(v);
        };
        auto to_dbl = [&](const std::string& s, const char* what) {
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw DataError(origin + ":" + std::to_string(lineno) + ": bad " + what + " '" +
                                s + "'");
            return v;
        };
        int frame = to_int(fields[0], "frame");
        int id = to_int(fields[1], "id");
        if (frame < 1)
            throw DataError(origin + ":" + std::to_string(lineno) + ": frames are 1-based");
        BoxPx box{to_dbl(fields[2], "x"), to_dbl(fields[3], "y"), to_dbl(fields[4], "w"),
                  to_dbl(fields[5], "h")};
        Trajectory& t = by_id[id];
        t.id = id;
        t.points.push_back({frame, box});
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) {
        std::sort(t.points.begin(), t.points.end(),
                  [](const TrackPoint& a, const TrackPoint& b) { return a.frame < b.frame; });
        for (std::size_t i = 1; i < t.points.size(); ++i)
            if (t.points[i].frame == t.points[i - 1].frame)
                throw DataError(origin + ": id " + std::to_string(id) + " has two boxes at frame " +
                                std::to_string(t.points[i].frame));
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Trajectory> parse_mot(const std::string& path) {
    return parse_mot_text(read_file(path), path);
}

}  // namespace fade

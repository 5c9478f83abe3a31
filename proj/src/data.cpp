#include "fgfpca/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

std::vector<std::string> split_csv_line(std::string line)
{
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t");
        const auto e = field.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t row, const char* column)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError(path.string() + ": row " + std::to_string(row) + ": cannot parse " + column + " '" + s + "'");
}

long parse_index(const std::string& s, const std::filesystem::path& path, std::size_t row, const char* column)
{
    long v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw DataError(path.string() + ": row " + std::to_string(row) + ": " + column + " must be an integer, got '" +
                        s + "'");
    return v;
}

std::ifstream open_with_header(const std::filesystem::path& path, const std::vector<std::string>& expected)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // UTF-8 BOM
    if (split_csv_line(line) != expected) {
        std::string want;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        throw DataError(path.string() + ": header must be '" + want + "'");
    }
    return in;
}

} // namespace

FunctionalDataset::FunctionalDataset(std::vector<std::string> subject_ids, std::vector<double> grid,
                                     Eigen::MatrixXd values, LinkFamily family, bool cyclic)
    : subject_ids_(std::move(subject_ids)), grid_(std::move(grid)), values_(std::move(values)), family_(family),
      cyclic_(cyclic)
{
    if (grid_.size() < 2) throw DataError("grid needs at least 2 points");
    for (std::size_t j = 1; j < grid_.size(); ++j)
        if (!(grid_[j] > grid_[j - 1])) throw DataError("grid must be strictly increasing");
    if (values_.cols() != static_cast<Eigen::Index>(grid_.size()))
        throw DataError("values have " + std::to_string(values_.cols()) + " columns but the grid has " +
                        std::to_string(grid_.size()) + " points");
    if (values_.rows() != static_cast<Eigen::Index>(subject_ids_.size()))
        throw DataError("values have " + std::to_string(values_.rows()) + " rows but there are " +
                        std::to_string(subject_ids_.size()) + " subject ids");
    std::unordered_map<std::string, int> seen;
    for (const auto& id : subject_ids_)
        if (++seen[id] > 1) throw DataError("duplicate subject id '" + id + "'");
    for (Eigen::Index i = 0; i < values_.rows(); ++i)
        for (Eigen::Index j = 0; j < values_.cols(); ++j)
            if (!family_.in_support(values_(i, j)))
                throw DataError("value " + std::to_string(values_(i, j)) + " for subject '" + subject_ids_[i] +
                                "' at s_index " + std::to_string(j + 1) + " is outside the " +
                                std::string(family_.name()) + " support");
}

std::vector<double> normalize_grid(const std::vector<double>& grid, bool cyclic)
{
    const double lo = grid.front();
    const double span = grid.back() - lo;
    const double n = static_cast<double>(grid.size());
    const double period = cyclic ? span * n / (n - 1.0) : span;
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) out[j] = (grid[j] - lo) / period;
    return out;
}

std::vector<double> FunctionalDataset::normalized_grid() const
{
    return normalize_grid(grid_, cyclic_);
}

FunctionalDataset FunctionalDataset::subset(const std::vector<Eigen::Index>& rows) const
{
    std::vector<std::string> ids;
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ids.push_back(subject_ids_.at(static_cast<std::size_t>(rows[r])));
        vals.row(static_cast<Eigen::Index>(r)) = values_.row(rows[r]);
    }
    return {std::move(ids), grid_, std::move(vals), family_, cyclic_};
}

FunctionalDataset load_long_csv(const std::filesystem::path& path, LinkFamily family, bool cyclic,
                                const std::optional<std::vector<double>>& coordinates)
{
    auto in = open_with_header(path, {"id", "s_index", "value"});

    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> id_index;
    std::map<std::pair<std::size_t, long>, double> cells;
    long max_index = 0;
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) throw DataError(path.string() + ": row " + std::to_string(row) + ": expected 3 fields");
        const long s = parse_index(f[1], path, row, "s_index");
        if (s < 1) throw DataError(path.string() + ": row " + std::to_string(row) + ": s_index must be >= 1");
        const double v = parse_double(f[2], path, row, "value");
        if (!family.in_support(v))
            throw DataError(path.string() + ": row " + std::to_string(row) + ": value " + f[2] + " is outside the " +
                            std::string(family.name()) + " support");
        auto [it, inserted] = id_index.try_emplace(f[0], ids.size());
        if (inserted) ids.push_back(f[0]);
        if (!cells.emplace(std::pair{it->second, s}, v).second)
            throw DataError(path.string() + ": row " + std::to_string(row) + ": duplicate cell (id=" + f[0] +
                            ", s_index=" + f[1] + ")");
        max_index = std::max(max_index, s);
    }
    if (ids.empty()) throw DataError(path.string() + ": no data rows");

    const auto n = static_cast<Eigen::Index>(ids.size());
    const auto J = static_cast<Eigen::Index>(max_index);
    Eigen::MatrixXd values(n, J);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < J; ++j) {
            const auto it = cells.find({static_cast<std::size_t>(i), static_cast<long>(j + 1)});
            if (it == cells.end())
                throw DataError(path.string() + ": dense design required; missing cell (id=" + ids[i] +
                                ", s_index=" + std::to_string(j + 1) + ")");
            values(i, j) = it->second;
        }

    std::vector<double> grid;
    if (coordinates) {
        if (coordinates->size() != static_cast<std::size_t>(J))
            throw DataError("coordinates have " + std::to_string(coordinates->size()) + " entries, data have J=" +
                            std::to_string(J));
        grid = *coordinates;
    } else {
        grid.resize(static_cast<std::size_t>(J));
        for (Eigen::Index j = 0; j < J; ++j) grid[j] = static_cast<double>(j + 1);
    }
    return {std::move(ids), std::move(grid), std::move(values), family, cyclic};
}

void write_long_csv(const std::filesystem::path& path, const FunctionalDataset& data)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "id,s_index,value\n";
    char buf[64];
    for (Eigen::Index i = 0; i < data.n_subjects(); ++i)
        for (Eigen::Index j = 0; j < data.n_points(); ++j) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data.values()(i, j));
            out << data.subject_ids()[i] << ',' << (j + 1) << ',' << std::string_view(buf, ptr - buf) << '\n';
        }
}

DailyProfileSet load_daily_csv(const std::filesystem::path& path)
{
    auto in = open_with_header(path, {"id", "day", "s_index", "value"});
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> id_index;
    // subject -> day label -> s_index -> value
    std::vector<std::map<long, std::map<long, double>>> cells;
    long max_index = 0;
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw DataError(path.string() + ": row " + std::to_string(row) + ": expected 4 fields");
        const long day = parse_index(f[1], path, row, "day");
        const long s = parse_index(f[2], path, row, "s_index");
        if (s < 1) throw DataError(path.string() + ": row " + std::to_string(row) + ": s_index must be >= 1");
        const double v = parse_double(f[3], path, row, "value");
        if (!std::isfinite(v)) throw DataError(path.string() + ": row " + std::to_string(row) + ": non-finite value");
        auto [it, inserted] = id_index.try_emplace(f[0], ids.size());
        if (inserted) {
            ids.push_back(f[0]);
            cells.emplace_back();
        }
        if (!cells[it->second][day].emplace(s, v).second)
            throw DataError(path.string() + ": row " + std::to_string(row) + ": duplicate cell");
        max_index = std::max(max_index, s);
    }
    DailyProfileSet out;
    out.subject_ids = ids;
    out.grid.resize(static_cast<std::size_t>(max_index));
    for (long j = 0; j < max_index; ++j) out.grid[j] = static_cast<double>(j + 1);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Eigen::MatrixXd days(static_cast<Eigen::Index>(cells[i].size()), max_index);
        Eigen::Index h = 0;
        for (const auto& [day, values] : cells[i]) {
            for (long j = 1; j <= max_index; ++j) {
                const auto it = values.find(j);
                if (it == values.end())
                    throw DataError(path.string() + ": missing cell (id=" + ids[i] + ", day=" + std::to_string(day) +
                                    ", s_index=" + std::to_string(j) + ")");
                days(h, j - 1) = it->second;
            }
            ++h;
        }
        out.days.push_back(std::move(days));
    }
    return out;
}

FunctionalDataset binarize_profiles(const DailyProfileSet& profiles, double threshold, bool cyclic)
{
    if (!std::isfinite(threshold)) throw ConfigError("threshold must be finite");
    if (profiles.days.size() != profiles.subject_ids.size())
        throw DataError("profile set has mismatched subject and day stacks");
    const auto J = static_cast<Eigen::Index>(profiles.grid.size());
    Eigen::MatrixXd z(static_cast<Eigen::Index>(profiles.subject_ids.size()), J);
    for (std::size_t i = 0; i < profiles.days.size(); ++i) {
        const auto& days = profiles.days[i];
        if (days.rows() == 0) throw DataError("subject '" + profiles.subject_ids[i] + "' has no days");
        if (days.cols() != J) throw DataError("subject '" + profiles.subject_ids[i] + "' has the wrong day length");
        // the (floor(H/2)+1)-th largest indicator is 1 iff that many days are active
        const Eigen::Index needed = days.rows() / 2 + 1;
        for (Eigen::Index j = 0; j < J; ++j) {
            const auto active = (days.col(j).array() >= threshold).count();
            z(static_cast<Eigen::Index>(i), j) = active >= needed ? 1.0 : 0.0;
        }
    }
    return {profiles.subject_ids, profiles.grid, std::move(z), LinkFamily{Family::binomial}, cyclic};
}

} // namespace fgfpca

#include "flexjm/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "flexjm/errors.hpp"

namespace flexjm {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& field, const std::string& file,
                    std::size_t row, const std::string& col) {
  if (field.empty())
    throw DataError(file + " row " + std::to_string(row) + ": empty field in column '" + col + "'");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (errno != 0 || end == field.c_str() || *end != '\0' || !std::isfinite(v))
    throw DataError(file + " row " + std::to_string(row) +
                    ": non-numeric value '" + field + "' in column '" + col + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Table tab;
  std::string line;
  // '#' lines are provenance stamps written by the simulator and fit runner.
  do {
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
  } while (line.empty() || line[0] == '#');
  tab.header = split_csv_line(line);
  const std::size_t w = tab.header.size();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (fields.size() != w)
      throw DataError(path + " row " + std::to_string(tab.rows.size() + 2) +
                      ": expected " + std::to_string(w) + " fields, got " +
                      std::to_string(fields.size()));
    tab.rows.push_back(std::move(fields));
  }
  return tab;
}

int column_index(const Table& tab, const std::string& name, const std::string& path) {
  for (std::size_t j = 0; j < tab.header.size(); ++j)
    if (tab.header[j] == name) return static_cast<int>(j);
  throw DataError(path + ": required column '" + name + "' missing");
}

}  // namespace

const Eigen::VectorXd& Dataset::covariate(const std::string& name) const {
  auto it = covars.find(name);
  if (it == covars.end())
    throw ConfigError("model refers to covariate '" + name +
                      "' which is not in the survival table");
  return it->second;
}

bool Dataset::has_covariate(const std::string& name) const {
  return covars.count(name) > 0;
}

void Dataset::validate() const {
  const int ns = n();
  if (ns < 1) throw DataError("dataset has no subjects");
  if (event.size() != ns || static_cast<int>(ids.size()) != ns)
    throw DataError("survival table columns have inconsistent lengths");
  for (int i = 0; i < ns; ++i) {
    if (!(time[i] > 0.0))
      throw DataError("subject '" + ids[i] + "': follow-up time must be positive, got " +
                      std::to_string(time[i]));
    if (event[i] != 0.0 && event[i] != 1.0)
      throw DataError("subject '" + ids[i] + "': event indicator must be 0 or 1, got " +
                      std::to_string(event[i]));
  }
  for (const auto& [name, col] : covars)
    if (col.size() != ns)
      throw DataError("covariate '" + name + "' has wrong length");
  const int m = n_obs();
  if (subj.size() != m || t.size() != m)
    throw DataError("longitudinal table columns have inconsistent lengths");
  for (int j = 0; j < m; ++j) {
    if (subj[j] < 0 || subj[j] >= ns)
      throw DataError("longitudinal row " + std::to_string(j + 2) +
                      ": subject index out of range");
    if (t[j] < 0.0 || t[j] > time[subj[j]])
      throw DataError("longitudinal row " + std::to_string(j + 2) + ": time " +
                      std::to_string(t[j]) + " outside [0, T] for subject '" +
                      ids[subj[j]] + "'");
    if (!std::isfinite(y[j]))
      throw DataError("longitudinal row " + std::to_string(j + 2) +
                      ": non-finite response");
  }
}

Dataset load_dataset(const std::string& survival_csv,
                     const std::string& longitudinal_csv) {
  Dataset d;
  const Table surv = read_table(survival_csv);
  const int c_id = column_index(surv, "id", survival_csv);
  const int c_time = column_index(surv, "time", survival_csv);
  const int c_event = column_index(surv, "event", survival_csv);

  const int ns = static_cast<int>(surv.rows.size());
  if (ns == 0) throw DataError(survival_csv + ": no subjects");
  d.time.resize(ns);
  d.event.resize(ns);
  std::unordered_map<std::string, int> index;
  for (std::size_t j = 0; j < surv.header.size(); ++j) {
    const std::string& h = surv.header[j];
    if (h != "id" && h != "time" && h != "event")
      d.covars[h] = Eigen::VectorXd(ns);
  }
  for (int i = 0; i < ns; ++i) {
    const auto& row = surv.rows[i];
    const std::string& id = row[c_id];
    if (id.empty())
      throw DataError(survival_csv + " row " + std::to_string(i + 2) + ": empty id");
    if (!index.emplace(id, i).second)
      throw DataError(survival_csv + " row " + std::to_string(i + 2) +
                      ": duplicate id '" + id + "'");
    d.ids.push_back(id);
    d.time[i] = parse_number(row[c_time], survival_csv, i + 2, "time");
    d.event[i] = parse_number(row[c_event], survival_csv, i + 2, "event");
    for (std::size_t j = 0; j < surv.header.size(); ++j) {
      const std::string& h = surv.header[j];
      if (h != "id" && h != "time" && h != "event")
        d.covars[h][i] = parse_number(row[j], survival_csv, i + 2, h);
    }
  }

  const Table lon = read_table(longitudinal_csv);
  const int l_id = column_index(lon, "id", longitudinal_csv);
  const int l_time = column_index(lon, "time", longitudinal_csv);
  const int l_y = column_index(lon, "y", longitudinal_csv);
  const int m = static_cast<int>(lon.rows.size());
  d.subj.resize(m);
  d.t.resize(m);
  d.y.resize(m);
  for (int j = 0; j < m; ++j) {
    const auto& row = lon.rows[j];
    auto it = index.find(row[l_id]);
    if (it == index.end())
      throw DataError(longitudinal_csv + " row " + std::to_string(j + 2) +
                      ": id '" + row[l_id] + "' not present in the survival table");
    d.subj[j] = it->second;
    d.t[j] = parse_number(row[l_time], longitudinal_csv, j + 2, "time");
    d.y[j] = parse_number(row[l_y], longitudinal_csv, j + 2, "y");
  }
  d.validate();  // before sorting, so errors cite file rows

  // Canonical row order: grouped by subject, ascending time.
  std::vector<int> order(m);
  for (int j = 0; j < m; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return d.subj[a] != d.subj[b] ? d.subj[a] < d.subj[b] : d.t[a] < d.t[b];
  });
  Dataset sorted = d;
  for (int j = 0; j < m; ++j) {
    sorted.subj[j] = d.subj[order[j]];
    sorted.t[j] = d.t[order[j]];
    sorted.y[j] = d.y[order[j]];
  }
  return sorted;
}

void write_dataset(const Dataset& data, const std::string& survival_csv,
                   const std::string& longitudinal_csv,
                   const std::string& stamp) {
  {
    std::ofstream out(survival_csv);
    if (!out) throw DataError("cannot write '" + survival_csv + "'");
    if (!stamp.empty()) out << "# " << stamp << '\n';
    out << "id,time,event";
    for (const auto& [name, col] : data.covars) out << ',' << name;
    out << '\n';
    char buf[64];
    for (int i = 0; i < data.n(); ++i) {
      out << data.ids[i];
      std::snprintf(buf, sizeof buf, ",%.17g,%g", data.time[i], data.event[i]);
      out << buf;
      for (const auto& [name, col] : data.covars) {
        std::snprintf(buf, sizeof buf, ",%.17g", col[i]);
        out << buf;
      }
      out << '\n';
    }
  }
  std::ofstream out(longitudinal_csv);
  if (!out) throw DataError("cannot write '" + longitudinal_csv + "'");
  if (!stamp.empty()) out << "# " << stamp << '\n';
  out << "id,time,y\n";
  char buf[64];
  for (int j = 0; j < data.n_obs(); ++j) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g", data.t[j], data.y[j]);
    out << data.ids[data.subj[j]] << buf << '\n';
  }
}

}  // namespace flexjm

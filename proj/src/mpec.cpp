#include "ess/mpec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ess {

KktSystem derive_kkt(const LinearProgram& lp) {
  KktSystem kkt;
  kkt.primal = lp;
  LinearProgram& p = kkt.primal;
  for (int j = 0; j < p.var_count(); ++j) {
    auto& var = p.vars[j];
    if (std::isfinite(var.lower)) {
      SparseRow row;
      row.add(j, 1.0);
      p.g_rows.push_back(std::move(row));
      p.g_rhs.push_back(var.lower);
      p.g_family.push_back(0);
      p.g_slot.push_back(var.slot);
    }
    if (std::isfinite(var.upper)) {
      SparseRow row;
      row.add(j, -1.0);
      p.g_rows.push_back(std::move(row));
      p.g_rhs.push_back(-var.upper);
      p.g_family.push_back(0);
      p.g_slot.push_back(var.slot);
    }
    var.lower = -kInf;
    var.upper = kInf;
  }

  const int n = p.var_count();
  const int ng = p.g_count();
  kkt.stationarity.assign(n, SparseRow{});
  kkt.stationarity_rhs = p.cost;
  for (int i = 0; i < ng; ++i) {
    const auto& row = p.g_rows[i];
    for (std::size_t k = 0; k < row.size(); ++k) kkt.stationarity[row.index[k]].add(i, row.value[k]);
  }
  for (int i = 0; i < p.h_count(); ++i) {
    const auto& row = p.h_rows[i];
    for (std::size_t k = 0; k < row.size(); ++k) kkt.stationarity[row.index[k]].add(ng + i, row.value[k]);
  }
  return kkt;
}

void MpecModel::fix_capacity(int col, double value) {
  model.col_lb[col] = value;
  model.col_ub[col] = value;
}

namespace {

void embed_block(MpecModel& mp, LowerBlock block, const std::string& tag) {
  MathModel& m = mp.model;
  const KktSystem& k = block.kkt;
  const LinearProgram& lp = k.primal;
  const int block_index = static_cast<int>(mp.blocks.size());

  block.x_begin = m.cols();
  for (int j = 0; j < lp.var_count(); ++j) m.add_col(lp.vars[j].name, -kInf, kInf);
  block.omega_begin = m.cols();
  for (int i = 0; i < lp.g_count(); ++i) {
    m.add_col(tag + "_w" + std::to_string(lp.g_family[i]) + "_" + std::to_string(lp.g_slot[i]), 0.0, kInf);
  }
  block.v_begin = m.cols();
  for (int i = 0; i < lp.h_count(); ++i) m.add_col(tag + "_v" + std::to_string(i), -kInf, kInf);

  std::vector<double> g_cap(lp.g_count(), 0.0), h_cap(lp.h_count(), 0.0);
  for (const auto& mk : lp.markers) (mk.equality ? h_cap : g_cap)[mk.row] = mk.coefficient;
  const std::vector<double> bg = lp.g_rhs_fixed();
  const std::vector<double> bh = lp.h_rhs_fixed();

  block.g_row_begin = m.row_count();
  for (int i = 0; i < lp.g_count(); ++i) {
    SparseRow row;
    const auto& src = lp.g_rows[i];
    for (std::size_t q = 0; q < src.size(); ++q) row.add(block.x_begin + src.index[q], src.value[q]);
    row.add(block.capacity_col, -g_cap[i]);
    const int r = m.add_row(tag + "_g" + std::to_string(lp.g_family[i]) + "_" + std::to_string(lp.g_slot[i]),
                            std::move(row), bg[i], kInf);
    mp.pairs.push_back({block.omega_begin + i, r, block_index, lp.g_family[i], lp.g_slot[i]});
  }
  block.h_row_begin = m.row_count();
  for (int i = 0; i < lp.h_count(); ++i) {
    SparseRow row;
    const auto& src = lp.h_rows[i];
    for (std::size_t q = 0; q < src.size(); ++q) row.add(block.x_begin + src.index[q], src.value[q]);
    row.add(block.capacity_col, -h_cap[i]);
    m.add_row(tag + "_h" + std::to_string(i), std::move(row), bh[i], bh[i]);
  }
  block.stationarity_row_begin = m.row_count();
  for (int j = 0; j < lp.var_count(); ++j) {
    SparseRow row;
    const auto& src = k.stationarity[j];
    for (std::size_t q = 0; q < src.size(); ++q) {
      const int d = src.index[q];
      const int col = d < lp.g_count() ? block.omega_begin + d : block.v_begin + (d - lp.g_count());
      row.add(col, src.value[q]);
    }
    m.add_row(tag + "_st_" + lp.vars[j].name, std::move(row), k.stationarity_rhs[j], k.stationarity_rhs[j]);
  }
  mp.blocks.push_back(std::move(block));
}

}  // namespace

MpecModel assemble_mpec(const Instance& in) {
  MpecModel mp;
  mp.instance = in;
  MathModel& m = mp.model;
  const int T = in.slots();
  const int N = in.customers();
  const double total = in.storage.total_capacity;
  const auto& w = in.weights;

  mp.peak_col = m.add_col("peak", -kInf, kInf, w.lambda1);
  mp.disco_capacity_col = m.add_col("s_disco", 0.0, total);
  for (int n = 0; n < N; ++n) mp.customer_capacity_cols.push_back(m.add_col("s_c" + std::to_string(n), 0.0, total));

  SparseRow cap;
  cap.add(mp.disco_capacity_col, 1.0);
  for (int c : mp.customer_capacity_cols) cap.add(c, 1.0);
  mp.capacity_row = m.add_row("capacity", std::move(cap), -kInf, total);

  // Peak rows are filled after the blocks exist.
  mp.peak_row_begin = m.row_count();
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(mp.peak_col, 1.0);
    m.add_row("peak_" + std::to_string(t), std::move(row), in.loads.system_load[t], kInf);
  }

  for (int n = 0; n < N; ++n) {
    LowerBlock b;
    b.kind = BlockKind::customer;
    b.customer = n;
    b.capacity_col = mp.customer_capacity_cols[n];
    b.kkt = derive_kkt(build_llm_c(in, n, 0.0));
    embed_block(mp, std::move(b), "c" + std::to_string(n));
  }
  {
    LowerBlock b;
    b.kind = BlockKind::disco;
    b.capacity_col = mp.disco_capacity_col;
    b.kkt = derive_kkt(build_llm_d(in, 0.0));
    embed_block(mp, std::move(b), "d");
  }

  // Upper objective and peak rows over every block's charge/discharge.
  const LlmLayout at{T};
  for (int t = 0; t < T; ++t) {
    const double price = (w.lambda2 * in.prices.lmp[t] + w.lambda3 * in.prices.tou[t]) * in.dt();
    m.offset += price * in.loads.system_load[t];
    for (const auto& b : mp.blocks) {
      const int ch = b.x_begin + at.charge(t);
      const int dis = b.x_begin + at.discharge(t);
      m.cost[ch] += price;
      m.cost[dis] -= price;
      m.rows[mp.peak_row_begin + t].add(ch, -1.0);
      m.rows[mp.peak_row_begin + t].add(dis, 1.0);
    }
  }
  return mp;
}

double default_dual_big_m(const Instance& in) {
  double scale = in.weights.alpha;
  // Generic MPECs carry no price data; the floor below then applies.
  for (double p : in.prices.lmp) scale = std::max(scale, std::abs(p));
  for (double p : in.prices.tou) scale = std::max(scale, p);
  return std::max(1000.0 * scale * in.dt(), 1e-3);
}

int MilpModel::binary_count() const {
  return static_cast<int>(std::count(model.integer.begin(), model.integer.end(), 1));
}

MilpModel linearize_big_m(std::shared_ptr<const MpecModel> mpec, const BigMPolicy& policy) {
  if (!mpec) throw Error(ErrorCode::invalid_argument, "linearize_big_m: null model");
  if (!(policy.escalation_factor > 1.0) || policy.max_rounds < 0 || !(policy.primal_default > 0.0) ||
      !std::isfinite(policy.primal_default) || policy.dual_default < 0.0 || !std::isfinite(policy.dual_default)) {
    throw Error(ErrorCode::invalid_argument, "invalid big-M policy");
  }
  const Instance& in = mpec->instance;
  const double total = in.storage.total_capacity;
  const auto& st = in.storage;
  const double dual_m = policy.dual_default > 0.0 ? policy.dual_default : default_dual_big_m(in);

  MilpModel milp;
  milp.source = mpec;
  milp.model = mpec->model;
  MathModel& m = milp.model;
  const int P = static_cast<int>(mpec->pairs.size());
  milp.pair_binary.resize(P);
  milp.dual_row.resize(P);
  milp.primal_row.resize(P);
  milp.big_m.resize(P);

  for (int p = 0; p < P; ++p) milp.pair_binary[p] = m.add_col("u" + std::to_string(p), 0.0, 1.0, 0.0, true);

  for (int p = 0; p < P; ++p) {
    const auto& pair = mpec->pairs[p];
    const auto& block = mpec->blocks[pair.block];
    BigMRecord rec;
    rec.dual_m = dual_m;
    double exact = kInf;
    if (policy.primal_from_bounds) {
      switch (pair.family) {
        case 1:
        case 2: exact = (st.soc_upper - st.soc_lower) * total; break;
        case 3:
        case 4:
        case 5:
        case 6: exact = st.power_ratio * total; break;
        case 7:
        case 8: {
          const Series& load = in.loads.customer_load.at(block.customer);
          const double peak = *std::max_element(load.begin(), load.end());
          exact = 2.0 * peak + 2.0 * st.power_ratio * total;
          break;
        }
        default: break;
      }
    }
    if (std::isfinite(exact)) {
      rec.primal_m = std::max(exact, 1.0);
      rec.primal_exact = true;
    } else {
      rec.primal_m = policy.primal_default;
      milp.warnings.push_back("pair " + std::to_string(p) + ": no finite primal bound, using default M");
    }
    milp.big_m[p] = rec;

    const int u = milp.pair_binary[p];
    SparseRow dual_row;
    dual_row.add(pair.dual_col, 1.0);
    dual_row.add(u, -rec.dual_m);
    milp.dual_row[p] = m.add_row("bmw" + std::to_string(p), std::move(dual_row), -kInf, 0.0);

    // g(x) <= M (1 - u)  <=>  A x + M u <= M + b
    SparseRow primal_row = mpec->model.rows[pair.g_row];
    primal_row.add(u, rec.primal_m);
    milp.primal_row[p] = m.add_row("bmg" + std::to_string(p), std::move(primal_row), -kInf,
                                   rec.primal_m + mpec->model.row_lb[pair.g_row]);
  }
  return milp;
}

BigMReport validate_big_m(const MilpModel& milp, const std::vector<double>& x, double tol) {
  BigMReport report;
  if (!milp.source) return report;
  const MpecModel& mp = *milp.source;
  for (int p = 0; p < static_cast<int>(mp.pairs.size()); ++p) {
    const auto& pair = mp.pairs[p];
    const auto& rec = milp.big_m[p];
    const double w = x[pair.dual_col];
    if (w >= rec.dual_m * (1.0 - tol)) report.binding.push_back({p, true, w, rec.dual_m});
    if (!rec.primal_exact) {
      const double g = pair_slack(mp, pair, x);
      if (g >= rec.primal_m * (1.0 - tol)) report.binding.push_back({p, false, g, rec.primal_m});
    }
  }
  return report;
}

double pair_slack(const MpecModel& mp, const ComplementarityPair& pair, const std::vector<double>& x) {
  return mp.model.rows[pair.g_row].dot(x) - mp.model.row_lb[pair.g_row];
}

}  // namespace ess

#include "fp3d/approximator.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fp3d {

std::string_view to_string(Role role) { return role == Role::actor ? "actor" : "critic"; }

Role parse_role(std::string_view text)
{
    if (text == "actor")
        return Role::actor;
    if (text == "critic")
        return Role::critic;
    throw std::invalid_argument("role must be 'actor' or 'critic', got '" + std::string(text) + "'");
}

NetParams::NetParams(Role role, int in_dim, int hidden1, int hidden2)
        : role_(role), dims_{in_dim, hidden1, hidden2, kOutputDim}
{
    if (in_dim < 1 || hidden1 < 1 || hidden2 < 1)
        throw std::invalid_argument("NetParams: dimensions must be positive");
    Eigen::Index total = 0;
    for (int l = 0; l < 3; ++l) {
        offsets_[l] = total;
        total += Eigen::Index(dims_[l + 1]) * dims_[l] + dims_[l + 1];
    }
    values_ = Eigen::VectorXd::Zero(total);
    first_moment = Eigen::VectorXd::Zero(total);
    second_moment = Eigen::VectorXd::Zero(total);
}

NetParams NetParams::initialized(Role role, int in_dim, std::uint64_t seed, int hidden1, int hidden2)
{
    NetParams p(role, in_dim, hidden1, hidden2);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < 3; ++l) {
        const double limit = std::sqrt(6.0 / (p.dims_[l] + p.dims_[l + 1]));
        std::uniform_real_distribution<double> dist(-limit, limit);
        auto w = p.weight(l);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = dist(rng);
    }
    return p;
}

Eigen::Map<const RowMajorMatrix> NetParams::weight(int layer) const
{
    return {values_.data() + offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<const Eigen::VectorXd> NetParams::bias(int layer) const
{
    return {values_.data() + offsets_[layer] + Eigen::Index(dims_[layer + 1]) * dims_[layer], dims_[layer + 1]};
}

Eigen::Map<RowMajorMatrix> NetParams::weight(int layer)
{
    return {values_.data() + offsets_[layer], dims_[layer + 1], dims_[layer]};
}

Eigen::Map<Eigen::VectorXd> NetParams::bias(int layer)
{
    return {values_.data() + offsets_[layer] + Eigen::Index(dims_[layer + 1]) * dims_[layer], dims_[layer + 1]};
}

bool operator==(const NetParams &a, const NetParams &b)
{
    return a.role_ == b.role_ && a.dims_ == b.dims_ && a.step == b.step && a.values_ == b.values_ &&
           a.first_moment == b.first_moment && a.second_moment == b.second_moment;
}

Eigen::MatrixXd forward(const NetParams &p, const Eigen::MatrixXd &inputs, ForwardCache *cache)
{
    if (inputs.rows() != p.in_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(inputs.rows()) + " rows, net expects " +
                                    std::to_string(p.in_dim()));
    Eigen::MatrixXd h1 = ((p.weight(0) * inputs).colwise() + p.bias(0)).array().tanh().matrix();
    Eigen::MatrixXd h2 = ((p.weight(1) * h1).colwise() + p.bias(1)).array().tanh().matrix();
    Eigen::MatrixXd raw = (p.weight(2) * h2).colwise() + p.bias(2);
    Eigen::MatrixXd out;
    if (p.role() == Role::actor)
        out = (0.5 * (raw.array().tanh() + 1.0)).matrix();
    else
        out = raw.cwiseMax(0.0);
    if (cache) {
        cache->input = inputs;
        cache->hidden1 = std::move(h1);
        cache->hidden2 = std::move(h2);
        cache->raw = std::move(raw);
        cache->output = out;
    }
    return out;
}

ContinuousAction actor_forward(const NetParams &p, std::span<const double> features)
{
    if (p.role() != Role::actor)
        throw std::invalid_argument("actor_forward: parameters belong to a critic");
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), Eigen::Index(features.size()));
    Eigen::MatrixXd out = forward(p, x);
    return {{out(0, 0), out(1, 0), out(2, 0)}};
}

std::vector<Rtg> critic_forward(const NetParams &p, std::span<const double> features,
                                std::span<const ContinuousAction> candidates)
{
    if (p.role() != Role::critic)
        throw std::invalid_argument("critic_forward: parameters belong to an actor");
    const auto n = Eigen::Index(features.size());
    Eigen::MatrixXd x(n + 3, Eigen::Index(candidates.size()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        x.col(j).head(n) = Eigen::Map<const Eigen::VectorXd>(features.data(), n);
        for (int d = 0; d < 3; ++d)
            x(n + d, j) = candidates[j][d];
    }
    Eigen::MatrixXd out = forward(p, x);
    std::vector<Rtg> preds(candidates.size());
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        preds[j] = {out(0, j), out(1, j), out(2, j)};
    return preds;
}

Rtg critic_forward(const NetParams &p, std::span<const double> features, const ContinuousAction &candidate)
{
    return critic_forward(p, features, std::span<const ContinuousAction>(&candidate, 1)).front();
}

double loss_actor(const ContinuousAction &pred, const ContinuousAction &target)
{
    double s = 0.0;
    for (int d = 0; d < 3; ++d)
        s += std::abs(pred[d] - target[d]);
    return s;
}

double loss_critic(const Rtg &pred, const Rtg &target)
{
    double s = 0.0;
    for (int d = 0; d < 3; ++d)
        s += std::abs(pred[d] - target[d]);
    return s;
}

double batch_loss(const NetParams &p, const Batch &batch)
{
    if (batch.inputs.cols() == 0)
        return 0.0;
    Eigen::MatrixXd out = forward(p, batch.inputs);
    return (out - batch.targets).cwiseAbs().sum() / double(batch.inputs.cols());
}

Eigen::VectorXd backward(const NetParams &p, const Batch &batch, double *loss)
{
    const auto n = batch.inputs.cols();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
    if (n == 0) {
        if (loss)
            *loss = 0.0;
        return grad;
    }
    if (batch.targets.rows() != kOutputDim || batch.targets.cols() != n)
        throw std::invalid_argument("backward: targets must be 3 x batch");
    ForwardCache c;
    forward(p, batch.inputs, &c);
    const Eigen::MatrixXd err = c.output - batch.targets;
    if (loss)
        *loss = err.cwiseAbs().sum() / double(n);

    // dL/d(output): sign with sign(0) = 0, averaged over the batch.
    Eigen::MatrixXd d_raw = err.unaryExpr([](double e) { return double((e > 0) - (e < 0)); }) / double(n);
    if (p.role() == Role::actor)
        d_raw.array() *= 0.5 * (1.0 - c.raw.array().tanh().square());
    else
        d_raw.array() *= (c.raw.array() > 0.0).cast<double>();

    auto store = [&](int layer, const Eigen::MatrixXd &delta, const Eigen::MatrixXd &below) {
        const auto rows = p.dims()[layer + 1], cols = p.dims()[layer];
        Eigen::Map<RowMajorMatrix>(grad.data() + p.offset(layer), rows, cols) = delta * below.transpose();
        Eigen::Map<Eigen::VectorXd>(grad.data() + p.offset(layer) + Eigen::Index(rows) * cols, rows) =
                delta.rowwise().sum();
    };
    store(2, d_raw, c.hidden2);
    Eigen::MatrixXd d2 = (p.weight(2).transpose() * d_raw).array() * (1.0 - c.hidden2.array().square());
    store(1, d2, c.hidden1);
    Eigen::MatrixXd d1 = (p.weight(1).transpose() * d2).array() * (1.0 - c.hidden1.array().square());
    store(0, d1, c.input);
    return grad;
}

void optimizer_step(NetParams &p, const Eigen::VectorXd &grad, const AdamConfig &cfg)
{
    if (grad.size() != p.size())
        throw std::invalid_argument("optimizer_step: gradient size mismatch");
    p.step += 1;
    auto &theta = p.values();
    theta *= (1.0 - cfg.learning_rate * cfg.weight_decay);
    p.first_moment = cfg.beta1 * p.first_moment + (1.0 - cfg.beta1) * grad;
    p.second_moment = cfg.beta2 * p.second_moment + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, double(p.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(p.step));
    theta.array() -= cfg.learning_rate * (p.first_moment.array() / c1) /
                     ((p.second_moment.array() / c2).sqrt() + cfg.epsilon);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void write_doubles(std::ostream &os, const double *data, Eigen::Index n)
{
    char buf[64];
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, data[i]);
        if (i)
            os.put(' ');
        os.write(buf, end - buf);
    }
    os.put('\n');
}

void write_tensors(std::ostream &os, const NetParams &p, const Eigen::VectorXd &flat)
{
    for (int l = 0; l < 3; ++l) {
        const Eigen::Index wsize = Eigen::Index(p.dims()[l + 1]) * p.dims()[l];
        write_doubles(os, flat.data() + p.offset(l), wsize);
        write_doubles(os, flat.data() + p.offset(l) + wsize, p.dims()[l + 1]);
    }
}

class TokenReader
{
  public:
    explicit TokenReader(std::istream &is) : is_(is) {}

    std::string next(const char *what)
    {
        std::string tok;
        if (!(is_ >> tok))
            throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
        return tok;
    }

    double next_double(const char *what)
    {
        auto tok = next(what);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw std::runtime_error(std::string("checkpoint: bad number '") + tok + "' in " + what);
        return v;
    }

    long long next_int(const char *what)
    {
        auto tok = next(what);
        long long v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw std::runtime_error(std::string("checkpoint: bad integer '") + tok + "' in " + what);
        return v;
    }

  private:
    std::istream &is_;
};

} // namespace

void write_checkpoint(std::ostream &os, const NetParams &p)
{
    os << "sgf-ckpt v1 " << to_string(p.role()) << ' ' << p.dims()[0] << ' ' << p.dims()[1] << ' ' << p.dims()[2]
       << ' ' << p.dims()[3] << '\n';
    write_tensors(os, p, p.values());
    os << "adam " << p.step << '\n';
    write_tensors(os, p, p.first_moment);
    write_tensors(os, p, p.second_moment);
}

NetParams read_checkpoint(std::istream &is)
{
    TokenReader r(is);
    if (r.next("magic") != "sgf-ckpt" || r.next("version") != "v1")
        throw std::runtime_error("not an sgf-ckpt v1 checkpoint");
    Role role = parse_role(r.next("role"));
    std::array<long long, 4> dims{};
    for (auto &d : dims)
        d = r.next_int("dimensions");
    if (dims[3] != kOutputDim)
        throw std::runtime_error("checkpoint output dimension must be 3");
    for (auto d : dims)
        if (d < 1 || d > (1 << 20))
            throw std::runtime_error("checkpoint dimension out of range");
    NetParams p(role, int(dims[0]), int(dims[1]), int(dims[2]));
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p.values()[i] = r.next_double("parameters");
    if (r.next("optimizer tag") != "adam")
        throw std::runtime_error("checkpoint: expected 'adam' section");
    p.step = r.next_int("optimizer step");
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p.first_moment[i] = r.next_double("first moment");
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p.second_moment[i] = r.next_double("second moment");
    std::string extra;
    if (is >> extra)
        throw std::runtime_error("checkpoint: trailing data");
    return p;
}

void save_checkpoint(const std::string &path, const NetParams &p)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    write_checkpoint(os, p);
    if (!os)
        throw std::runtime_error("error writing " + path);
}

NetParams load_checkpoint(const std::string &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot read " + path);
    return read_checkpoint(is);
}

} // namespace fp3d

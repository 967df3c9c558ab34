#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "smf/errors.hpp"
#include "smf/io.hpp"
#include "smf/synthetic.hpp"

using namespace smf;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() : path_(fs::temp_directory_path() / ("smf_io_" + std::to_string(std::random_device{}()))) {
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string input_error(const std::string& text) {
    try {
        parse_csv(text, "f.csv");
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Csv, ParseCommentsHeaderAndRows) {
    const CsvTable t = parse_csv("# {\"seed\":1}\na,b\n1,2.5\n-3,4e-3\n");
    ASSERT_EQ(t.comments.size(), 1u);
    EXPECT_EQ(t.comments[0], "{\"seed\":1}");
    ASSERT_EQ(t.columns.size(), 2u);
    EXPECT_EQ(t.column("b"), 1);
    EXPECT_EQ(t.column("zz"), -1);
    ASSERT_EQ(t.data.rows(), 2);
    EXPECT_DOUBLE_EQ(t.data(1, 0), -3.0);
    EXPECT_DOUBLE_EQ(t.data(1, 1), 4e-3);
}

TEST(Csv, QuotedFields) {
    const CsvTable t = parse_csv("\"x, one\",\"say \"\"hi\"\"\"\n\"1\", 2\n");
    EXPECT_EQ(t.columns[0], "x, one");
    EXPECT_EQ(t.columns[1], "say \"hi\"");
    EXPECT_DOUBLE_EQ(t.data(0, 0), 1.0);
    const std::string text = format_csv("", {"x, one", "plain"}, Eigen::MatrixXd::Ones(1, 2));
    EXPECT_EQ(parse_csv(text).columns[0], "x, one");
}

TEST(Csv, ErrorsCarryLineNumbers) {
    EXPECT_NE(input_error("a,b\n1,2\n3\n").find("f.csv:3:"), std::string::npos);
    EXPECT_NE(input_error("a,b\n1,zz\n").find("f.csv:2:"), std::string::npos);
    EXPECT_NE(input_error("a\n\"1\n").find("f.csv:2:"), std::string::npos);
    EXPECT_NE(input_error("# only a comment\n").find("f.csv"), std::string::npos);
    EXPECT_THROW(read_csv("/nonexistent/file.csv"), InputError);
}

TEST(Csv, RoundTripExact) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1e3);
    Eigen::MatrixXd x(20, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng) * std::pow(10.0, static_cast<double>(i % 7) - 3.0);
    x(0, 0) = std::numeric_limits<double>::min();
    x(0, 1) = -0.0;
    TempDir dir;
    write_csv(dir / "a.csv", "{\"config_hash\":\"00\"}", {"s1", "s2", "s3", "s4"}, x);
    const CsvTable t = read_csv(dir / "a.csv");
    EXPECT_TRUE((t.data.array() == x.array()).all());
    EXPECT_EQ(t.comments.at(0), "{\"config_hash\":\"00\"}");
    EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
    EXPECT_EQ(format_double(2.0), "2");
}

TEST(SampleMatrixCsv, KindFromVColumn) {
    TempDir dir;
    const SampleMatrix m(Eigen::MatrixXd::Constant(3, 2, 1.5), FieldKind::ScaleMixture, Eigen::VectorXd::Constant(3, 0.7));
    write_sample_matrix_csv(dir / "m.csv", "", m);
    const CsvTable raw = read_csv(dir / "m.csv");
    ASSERT_EQ(raw.columns.size(), 3u);
    EXPECT_EQ(raw.columns[0], "s1");
    EXPECT_EQ(raw.columns[2], "v");
    const SampleMatrix back = read_sample_matrix_csv(dir / "m.csv");
    EXPECT_EQ(back.kind(), FieldKind::ScaleMixture);
    EXPECT_EQ(back.values().cols(), 2);
    EXPECT_DOUBLE_EQ((*back.v_draws())(2), 0.7);

    write_sample_matrix_csv(dir / "g.csv", "", SampleMatrix(Eigen::MatrixXd::Zero(2, 2), FieldKind::Gaussian));
    EXPECT_EQ(read_sample_matrix_csv(dir / "g.csv", FieldKind::Gaussian).kind(), FieldKind::Gaussian);
    EXPECT_THROW(read_sample_matrix_csv(dir / "g.csv", FieldKind::ScaleMixture), InputError);
}

TEST(Smx1, LayoutAndRoundTrip) {
    TempDir dir;
    Eigen::MatrixXd x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    write_smx1(dir / "a.smx", x);
    const std::string bytes = read_bytes(dir / "a.smx");
    ASSERT_EQ(bytes.size(), 12u + 6u * 8u);
    EXPECT_EQ(bytes.substr(0, 4), "SMX1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
    double second = 0.0;
    std::memcpy(&second, bytes.data() + 12 + 8, 8);
    EXPECT_DOUBLE_EQ(second, 2.0);  // row-major
    EXPECT_TRUE((read_smx1(dir / "a.smx").array() == x.array()).all());

    write_text(dir / "bad.smx", "SMX2xxxxxxxx");
    EXPECT_THROW(read_smx1(dir / "bad.smx"), InputError);
    write_text(dir / "short.smx", bytes.substr(0, 30));
    EXPECT_THROW(read_smx1(dir / "short.smx"), InputError);
}

TEST(SitesCsv, CoordinatesAndCovariates) {
    TempDir dir;
    write_text(dir / "s.csv", "x,y,elev\n0,0,10\n1,2,20\n");
    const SitesFile f = read_sites_csv(dir / "s.csv");
    ASSERT_EQ(f.sites.size(), 2u);
    EXPECT_DOUBLE_EQ(f.sites[1].y, 2.0);
    ASSERT_EQ(f.covariate_names.size(), 1u);
    EXPECT_DOUBLE_EQ(f.covariates(1, 0), 20.0);
    write_text(dir / "dup.csv", "x,y\n1,1\n1,1\n");
    EXPECT_THROW(read_sites_csv(dir / "dup.csv"), InputError);
    EXPECT_NO_THROW(read_sites_csv(dir / "dup.csv", true));
    write_text(dir / "noy.csv", "x,z\n1,1\n");
    EXPECT_THROW(read_sites_csv(dir / "noy.csv"), InputError);
}

TEST(MixtureCsv, RoundTrip) {
    TempDir dir;
    const GammaMixture mix = reference_mixture();
    write_mixture_csv(dir / "mix.csv", "", mix);
    const GammaMixture back = read_mixture_csv(dir / "mix.csv");
    ASSERT_EQ(back.size(), mix.size());
    for (std::size_t s = 0; s < mix.size(); ++s) {
        EXPECT_EQ(back.components()[s].weight, mix.components()[s].weight);
        EXPECT_EQ(back.components()[s].shape, mix.components()[s].shape);
        EXPECT_EQ(back.components()[s].scale, mix.components()[s].scale);
    }
    EXPECT_THROW(read_mixture_csv(dir / "mix.csv", MeanPolicy::RequireUnit), DomainError);
}

TEST(Fnv1a64, KnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

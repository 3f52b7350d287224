#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "mogp/data.hpp"
#include "mogp/error.hpp"

using namespace mogp;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name, const std::string& text) {
  fs::create_directories(MOGP_TEST_TMP);
  const fs::path p = fs::path(MOGP_TEST_TMP) / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

Channel line_channel(int n, double slope = 0.0, double offset = 0.0) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0);
  return Channel("c", x, (slope * x.array() + offset).matrix());
}

std::vector<double> train_x(const Channel& c) {
  std::vector<double> out;
  for (std::size_t i : c.train_indices()) out.push_back(c.x()(static_cast<Eigen::Index>(i), 0));
  return out;
}

std::vector<double> removed_x(const Channel& c) {
  std::vector<double> out;
  for (std::size_t i : c.removed_indices()) out.push_back(c.x()(static_cast<Eigen::Index>(i), 0));
  return out;
}

}  // namespace

TEST(ChannelTest, SortsByInputAndRejectsDuplicates) {
  Channel c("a", Eigen::Vector3d(2.0, 0.0, 1.0), Eigen::Vector3d(20.0, 0.0, 10.0));
  EXPECT_EQ(c.x()(0, 0), 0.0);
  EXPECT_EQ(c.y()(2), 20.0);
  EXPECT_THROW(Channel("a", Eigen::Vector3d(1.0, 0.0, 1.0), Eigen::Vector3d(1.0, 2.0, 3.0)), InvalidInput);
}

TEST(RemoveRange, InclusiveSpanEndpoints) {
  Channel c = line_channel(11);
  remove_relative_range(c, 0.2, 0.3);
  EXPECT_EQ(removed_x(c), (std::vector<double>{2.0, 3.0}));

  Channel d = line_channel(11);
  remove_relative_range(d, 0.5, 0.5);
  EXPECT_EQ(removed_x(d), (std::vector<double>{5.0}));

  Channel e = line_channel(11);
  remove_relative_range(e, 0.0, 1.0);
  EXPECT_EQ(e.train_count(), 0u);
  EXPECT_EQ(e.size(), 11u);

  EXPECT_THROW(remove_relative_range(c, 0.6, 0.4), InvalidInput);
}

TEST(RemoveRange, ComposesWithExistingMask) {
  Channel c = line_channel(11);
  remove_relative_range(c, 0.0, 0.1);
  remove_relative_range(c, 0.9, 1.0);
  EXPECT_EQ(removed_x(c), (std::vector<double>{0.0, 1.0, 9.0, 10.0}));
}

TEST(RemoveRandomly, ExactCountAndDeterminism) {
  Channel a = line_channel(100);
  remove_randomly(a, 0.3, 5);
  EXPECT_EQ(a.removed_indices().size(), 30u);
  Channel b = line_channel(100);
  remove_randomly(b, 0.3, 5);
  EXPECT_EQ(a.mask(), b.mask());

  Channel c = line_channel(100);
  remove_randomly(c, 0.0, 5);
  EXPECT_EQ(c.train_count(), 100u);

  remove_randomly(a, 0.5, 6);
  EXPECT_EQ(a.train_count(), 35u);
}

TEST(Transforms, DetrendRemovesExactLine) {
  Channel c = line_channel(20, 2.0, 3.0);
  apply_transform(c, Detrend{1});
  EXPECT_LE(c.y().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Transforms, WhitenUsesPopulationStd) {
  Channel c("w", Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(1, 2, 3));
  apply_transform(c, Whiten{});
  EXPECT_NEAR(c.y()(0), -1.22474, 1e-5);
  EXPECT_NEAR(c.y()(1), 0.0, 1e-15);
  EXPECT_NEAR(c.y()(2), 1.22474, 1e-5);
  const auto& w = std::get<Whiten>(c.transforms().items().back());
  EXPECT_NEAR(w.stddev, std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Transforms, FittedOnTrainingPointsOnly) {
  Channel c("w", Eigen::Vector4d(0, 1, 2, 3), Eigen::Vector4d(1, 2, 3, 100));
  c.remove_point(3);
  apply_transform(c, Whiten{});
  const auto& w = std::get<Whiten>(c.transforms().items().back());
  EXPECT_NEAR(w.mean, 2.0, 1e-15);
  EXPECT_NEAR(c.y()(3), 98.0 / std::sqrt(2.0 / 3.0), 1e-9);
}

TEST(Transforms, DomainAndDegenerateErrors) {
  Channel c("l", Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(0, 2, 3));
  EXPECT_THROW(apply_transform(c, LogTransform{0.0}), InvalidInput);
  Channel flat("f", Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(4, 4, 4));
  EXPECT_THROW(apply_transform(flat, Whiten{}), InvalidInput);
}

TEST(Transforms, RandomStacksRoundTrip) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 12;
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.0, 10.0);
    Eigen::VectorXd y(n);
    for (int k = 0; k < n; ++k) y(k) = u(rng) + 0.3 * x(k);
    Channel c("r", x, y);
    const int d = depth(rng);
    bool logged = false;
    for (int s = 0; s < d; ++s) {
      const int t = kind(rng);
      if (t == 0 && !logged && c.y().minCoeff() > 0.0) {
        apply_transform(c, LogTransform{0.1});
        logged = true;
      } else if (t == 1) {
        apply_transform(c, Detrend{s % 3});
      } else {
        apply_transform(c, Whiten{});
      }
    }
    const Eigen::VectorXd back = detransform(c, c.x(), c.y());
    ASSERT_LE((back - c.raw_y()).cwiseAbs().maxCoeff(), 1e-10) << trial;
    for (int k = 0; k < n; ++k)
      ASSERT_NEAR(c.transforms().forward(x(k), c.transforms().backward(x(k), c.y()(k))), c.y()(k), 1e-10);
  }
}

TEST(Transforms, BoundsThroughWhitenAndLog) {
  Channel c("b", Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(1, 2, 4));
  apply_transform(c, Whiten{});
  const double sd = std::get<Whiten>(c.transforms().items()[0]).stddev;
  Bounds b{Eigen::Vector2d(0.0, 0.5), Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(1.0, 1.5)};
  Eigen::MatrixXd x(2, 1);
  x << 0.5, 1.5;
  const Bounds out = detransform(c, x, b);
  EXPECT_NEAR(out.upper(0) - out.lower(0), 2.0 * sd, 1e-12);

  Channel l("l", Eigen::Vector3d(0, 1, 2), Eigen::Vector3d(1, 2, 4));
  apply_transform(l, LogTransform{0.0});
  const Bounds lo = detransform(l, x, b);
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT(lo.lower(k), lo.mean(k));
    EXPECT_LT(lo.mean(k), lo.upper(k));
  }
}

TEST(DataSetTest, AugmentedCountsAndPartition) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Channel> chans;
    std::size_t expect_train = 0;
    std::size_t expect_removed = 0;
    for (int m = 0; m < 3; ++m) {
      Channel c = line_channel(5 + trial % 7 + m);
      c = Channel("c" + std::to_string(m), c.x(), c.raw_y());
      remove_randomly(c, 0.4, rng());
      expect_train += c.train_count();
      expect_removed += c.size() - c.train_count();
      chans.push_back(std::move(c));
    }
    DataSet ds(std::move(chans));
    const AugmentedData tr = to_augmented(ds, Selection::Train);
    const AugmentedData rm = to_augmented(ds, Selection::Removed);
    const AugmentedData all = to_augmented(ds, Selection::All);
    EXPECT_EQ(tr.input.size(), expect_train);
    EXPECT_EQ(rm.input.size(), expect_removed);
    EXPECT_EQ(all.input.size(), expect_train + expect_removed);
    std::multiset<std::pair<int, double>> a;
    std::multiset<std::pair<int, double>> b;
    for (std::size_t r = 0; r < all.input.size(); ++r) a.insert({all.input.channel(r), all.input.x()(static_cast<Eigen::Index>(r), 0)});
    for (const auto* part : {&tr, &rm})
      for (std::size_t r = 0; r < part->input.size(); ++r)
        b.insert({part->input.channel(r), part->input.x()(static_cast<Eigen::Index>(r), 0)});
    EXPECT_EQ(a, b);
  }
}

TEST(DataSetTest, TwoChannelConcatenation) {
  DataSet ds({line_channel(3), Channel("d", Eigen::VectorXd::LinSpaced(5, 0, 4), Eigen::VectorXd::Zero(5))});
  const AugmentedData a = to_augmented(ds, Selection::Train);
  EXPECT_EQ(a.input.size(), 8u);
  EXPECT_EQ(a.input.channel_counts(2), (std::vector<std::size_t>{3, 5}));
  EXPECT_THROW(to_augmented(ds, Selection::Removed), InvalidInput);
  ds[1].remove_point(0);
  ds[1].remove_point(2);
  EXPECT_EQ(to_augmented(ds, Selection::Removed).input.size(), 2u);
  EXPECT_THROW(DataSet({line_channel(3), line_channel(4)}), InvalidInput);
}

TEST(Csv, FourValueColumns) {
  const fs::path p = tmp_file("four.csv",
                              "Time,CO(GT),NO2(GT),C6H6(GT),NOx(GT)\n"
                              "0,1,2,3,4\n1,1.5,,3.5,4.5\n2,2,3,x,5\n3,2.5,3.5,4.5,5.5\n");
  const DataSet ds = load_csv(p, {"Time", {"CO(GT)", "NO2(GT)", "C6H6(GT)", "NOx(GT)"}, std::nullopt, 3600.0});
  ASSERT_EQ(ds.size(), 4);
  EXPECT_EQ(ds[0].size(), 4u);
  EXPECT_EQ(ds[1].size(), 3u);
  EXPECT_EQ(ds[2].size(), 3u);
  EXPECT_EQ(ds[3].size(), 4u);
  EXPECT_EQ(ds[1].name(), "NO2(GT)");
}

TEST(Csv, QuotesAndByteOrderMark) {
  const fs::path p = tmp_file("quoted.csv", "\xEF\xBB\xBF\"t\",\"a, b\"\n1,\"2.5\"\n2,3\n");
  const DataSet ds = load_csv(p, {"t", {"a, b"}, std::nullopt, 3600.0});
  ASSERT_EQ(ds[0].size(), 2u);
  EXPECT_EQ(ds[0].y()(0), 2.5);
}

TEST(Csv, Errors) {
  EXPECT_THROW(load_csv(fs::path(MOGP_TEST_TMP) / "absent.csv", {"t", {"a"}, std::nullopt, 3600.0}), IngestionError);
  try {
    load_csv(fs::path(MOGP_TEST_TMP) / "absent.csv", {"t", {"a"}, std::nullopt, 3600.0});
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("absent.csv"), std::string::npos);
  }
  const fs::path header = tmp_file("header.csv", "t,a\n");
  EXPECT_THROW(load_csv(header, {"t", {"a"}, std::nullopt, 3600.0}), IngestionError);
  const fs::path p = tmp_file("cols.csv", "t,a\n1,2\n");
  EXPECT_THROW(load_csv(p, {"t", {"b"}, std::nullopt, 3600.0}), IngestionError);
}

TEST(Csv, TimestampsAndRowErrors) {
  const fs::path p = tmp_file("times.csv", "when,v\n2004-03-10T19:00,2\n2004-03-10T18:00,1\n2004-03-11T18:00,3\n");
  const DataSet ds = load_csv(p, {"when", {"v"}, std::string("iso"), 3600.0});
  EXPECT_EQ(ds[0].x()(0, 0), 0.0);
  EXPECT_EQ(ds[0].x()(1, 0), 1.0);
  EXPECT_EQ(ds[0].x()(2, 0), 24.0);

  const fs::path bad = tmp_file("bad_times.csv", "when,v\n2004-03-10T18:00,1\nnot-a-date,2\n");
  try {
    load_csv(bad, {"when", {"v"}, std::string("iso"), 3600.0});
    FAIL();
  } catch (const IngestionError& e) {
    ASSERT_TRUE(e.row().has_value());
    EXPECT_EQ(*e.row(), 2u);
  }
}

TEST(Time, ParseAndUnits) {
  const std::vector<std::string> t = {"2004-03-10T19:00", "2004-03-10T18:00"};
  const auto v = parse_times(t, "iso", 3600.0);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_EQ(v[1], 0.0);
  EXPECT_EQ(parse_time("1970-01-02 00:00:00"), 86400.0);
  EXPECT_EQ(parse_time("10/03/2004 18.00.00", "%d/%m/%Y %H.%M.%S"), parse_time("2004-03-10T18:00:00"));
  EXPECT_THROW(parse_time("not-a-date"), InvalidInput);
  EXPECT_EQ(time_unit_seconds("hours"), 3600.0);
  EXPECT_EQ(time_unit_seconds("days"), 86400.0);
  EXPECT_EQ(time_unit_seconds("60"), 60.0);
  EXPECT_THROW(time_unit_seconds("fortnights"), InvalidInput);
}

TEST(Fingerprint, StableAndContentSensitive) {
  const fs::path a = tmp_file("fa.csv", "t,a\n1,2\n");
  const fs::path b = tmp_file("fb.csv", "t,a\n1,3\n");
  EXPECT_EQ(file_fingerprint(a), file_fingerprint(a));
  EXPECT_NE(file_fingerprint(a), file_fingerprint(b));
  EXPECT_EQ(file_fingerprint(a).size(), 16u);
  const fs::path empty = tmp_file("empty.bin", "");
  EXPECT_EQ(file_fingerprint(empty), "cbf29ce484222325");
}
